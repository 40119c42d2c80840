//! Command-line front end: `run`, `oracle`, `diff`, `bench` and `gen`.
//!
//! Exit codes: 0 when no race was found (or two reports agree), 3 when a
//! race was found (or reports disagree), 1 on bad input or usage, 2 when an
//! internal consistency check fails.

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::detector::{run_stream, run_trace, RaceDetector, RunError, RunOptions};
use crate::hb::{fasttrack_for, short_fasttrack_for};
use crate::oracle;
use crate::report::{Counters, Findings, Granularity, RaceReport, ReportPair};
use crate::sp::{Retention, ScanMode, ShortSyncP, SpConfig};
use crate::trace::{EventStream, ParseError, Trace, WfViolation};
use crate::tracegen::{gen_trace, plant_short_race, GenError, GenParams, TraceGenerator};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const EXIT_RACE: i32 = 3;

/// Environment variable enabling full-state checks after every event.
pub const ASSERT_ENV: &str = "RACE_MON_ASSERT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {}: {}", .0.line, .0)]
    Parse(ParseError),
    #[error("ill-formed trace at event {}: {}", .0.idx, .0.kind)]
    IllFormed(WfViolation),
    #[error("{0}")]
    Usage(String),
    #[error("reports are over different traces ({0} vs {1})")]
    HashMismatch(String, String),
    #[error("{path}: invalid report: {source}")]
    BadReport { path: String, source: serde_json::Error },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("internal check failed: {0}")]
    Internal(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}

impl From<RunError> for HarnessError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Parse(e) => HarnessError::Parse(e),
            RunError::IllFormed(e) => HarnessError::IllFormed(e),
            RunError::Invariant(e) => HarnessError::Internal(e.to_string()),
        }
    }
}

impl From<ParseError> for HarnessError {
    fn from(e: ParseError) -> Self {
        HarnessError::Parse(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Ft,
    ShortFt,
    Syncp,
    ShortSyncp,
    OracleHb,
    OracleSp,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Ft => "ft",
            Algo::ShortFt => "short-ft",
            Algo::Syncp => "syncp",
            Algo::ShortSyncp => "short-syncp",
            Algo::OracleHb => "oracle-hb",
            Algo::OracleSp => "oracle-sp",
        }
    }

    fn windowed(self) -> bool {
        matches!(self, Algo::ShortFt | Algo::ShortSyncp)
    }

    fn is_oracle(self) -> bool {
        matches!(self, Algo::OracleHb | Algo::OracleSp)
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Algo as ValueEnum>::from_str(s, false)
    }
}

/// A window bound: a number of events, or `100%` for the whole trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Events(u64),
    Full,
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "100%" {
            return Ok(Window::Full);
        }
        s.parse::<u64>().map(Window::Events).map_err(|_| format!("window must be a number of events or 100%, got {s:?}"))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Events(w) => write!(f, "{w}"),
            Window::Full => f.write_str("100%"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    #[default]
    AllPairs,
    FirstPerPattern,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum RetentionArg {
    #[default]
    Exact,
    WindowOnly,
}

#[derive(Debug, Parser)]
#[command(name = "shortrace", version, about = "Detect short data races in execution traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a trace with one detector.
    Run(RunArgs),
    /// Compute races by brute force (small traces only).
    Oracle(OracleArgs),
    /// Compare two reports over the same trace.
    Diff(DiffArgs),
    /// Run several detector configurations over a directory of traces.
    Bench(BenchArgs),
    /// Generate a random well-formed trace.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report granularity.
    #[arg(long, default_value = "pairs")]
    pub report: Granularity,
    /// Stop after the first race.
    #[arg(long)]
    pub first_race: bool,
    /// Print run statistics, including wall time, to stderr.
    #[arg(long)]
    pub stats: bool,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Race span bound: events, or 100% for the trace length.
    #[arg(long)]
    pub window: Option<Window>,
    /// Trace file; `-` or absent reads stdin.
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Candidate enumeration of the sync-preserving detectors.
    #[arg(long, value_enum, default_value_t = ScanArg::AllPairs)]
    pub scan: ScanArg,
    /// Lifetime of critical-section summaries in short-syncp.
    #[arg(long, value_enum, default_value_t = RetentionArg::Exact)]
    pub retention: RetentionArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Hb,
    Sp,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub kind: OracleKind,
    /// Keep only pairs of at most this span.
    #[arg(long)]
    pub window: Option<Window>,
    pub input: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum DiffLevel {
    #[default]
    Pairs,
    Vars,
    Decision,
}

#[derive(Debug, Clone, Args)]
pub struct DiffArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Compare only pairs of at most this span.
    #[arg(long)]
    pub span: Option<u64>,
    /// Finest level that must agree.
    #[arg(long, value_enum, default_value_t = DiffLevel::Pairs)]
    pub level: DiffLevel,
}

/// One detector configuration of a benchmark: `algo` or `algo:window`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub algo: Algo,
    pub window: Option<Window>,
}

impl FromStr for BenchConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, w) = match s.split_once(':') {
            Some((a, w)) => (a, Some(w.parse()?)),
            None => (s, None),
        };
        Ok(BenchConfig { algo: a.parse()?, window: w })
    }
}

impl fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.window {
            Some(w) => write!(f, "{}:{w}", self.algo.name()),
            None => f.write_str(self.algo.name()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Directory of trace files (every regular file is read, in name order).
    pub corpus: PathBuf,
    /// Configuration `algo[:window]`; repeatable.
    #[arg(long = "config")]
    pub configs: Vec<BenchConfig>,
    #[arg(long, default_value = "pairs")]
    pub report: Granularity,
    /// Write zero wall times so the table is reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2)]
    pub threads: usize,
    #[arg(long, default_value_t = 2)]
    pub vars: usize,
    #[arg(long, default_value_t = 1)]
    pub locks: usize,
    #[arg(long, default_value_t = 20)]
    pub length: usize,
    /// Probability that a step is a lock operation.
    #[arg(long, default_value_t = 0.2)]
    pub lock_density: f64,
    /// Probability that an access is a read.
    #[arg(long, default_value_t = 0.5)]
    pub read_bias: f64,
    #[arg(long, default_value_t = 4.0)]
    pub cs_mean_len: f64,
    /// Leave some acquires unreleased at the end.
    #[arg(long)]
    pub allow_dangling: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plant a race of exactly this span on a fresh variable; the pair is
    /// printed to stderr.
    #[arg(long)]
    pub plant_span: Option<usize>,
    /// Write `count` traces with seeds `seed..seed+count` into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

impl GenArgs {
    fn params(&self, seed: u64) -> GenParams {
        GenParams {
            threads: self.threads,
            vars: self.vars,
            locks: self.locks,
            length: self.length,
            lock_density: self.lock_density,
            read_bias: self.read_bias,
            cs_mean_len: self.cs_mean_len,
            allow_dangling: self.allow_dangling,
            seed,
        }
    }
}

/// Standard streams of one invocation, injectable for tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

fn assert_from_env() -> bool {
    std::env::var(ASSERT_ENV).is_ok_and(|v| v == "1")
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn main_with<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let target: &mut dyn Write = if shown { io.stdout } else { io.stderr };
            let _ = write!(target, "{}", e.render());
            return if shown { EXIT_CLEAN } else { EXIT_INPUT };
        }
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli.command, assert_from_env(), io)));
    match outcome {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            let _ = writeln!(io.stderr, "internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}

/// Entry point for the binary.
pub fn main_entry() -> i32 {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let stderr = io::stderr();
    let mut stderr = stderr.lock();
    // panics are reported through the exit code
    panic::set_hook(Box::new(|_| {}));
    let code = main_with(std::env::args_os(), &mut Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr });
    let _ = stdout.flush();
    code
}

fn dispatch(cmd: Command, assert_invariants: bool, io: &mut Io<'_>) -> Result<i32, HarnessError> {
    match cmd {
        Command::Run(a) => cmd_run(&a, assert_invariants, io),
        Command::Oracle(a) => {
            let algo = match a.kind {
                OracleKind::Hb => Algo::OracleHb,
                OracleKind::Sp => Algo::OracleSp,
            };
            let run = RunArgs {
                algo,
                window: a.window,
                input: Some(a.input),
                output: a.output,
                scan: ScanArg::default(),
                retention: RetentionArg::default(),
            };
            cmd_run(&run, assert_invariants, io)
        }
        Command::Diff(a) => cmd_diff(&a, io),
        Command::Bench(a) => cmd_bench(&a, assert_invariants, io),
        Command::Gen(a) => cmd_gen(&a, io),
    }
}

fn read_trace(path: &Path) -> Result<Trace, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(Trace::from_reader(BufReader::new(f))?)
}

fn is_stdin(input: &Option<PathBuf>) -> bool {
    input.as_deref().is_none_or(|p| p == Path::new("-"))
}

/// Detector options shared by `run` and `bench`.
#[derive(Clone, Copy, Debug)]
struct Setup {
    algo: Algo,
    /// Resolved window in events, for windowed detectors and oracle filters.
    window: Option<u64>,
    scan: ScanMode,
    retention: Retention,
}

impl Setup {
    fn resolve(algo: Algo, window: Option<Window>, len: Option<u64>) -> Result<Setup, HarnessError> {
        let window = match (algo.windowed(), algo.is_oracle(), window) {
            (true, _, None) => return Err(HarnessError::Usage(format!("--window is required for {}", algo.name()))),
            (_, _, Some(Window::Full)) => {
                let n = len.ok_or_else(|| HarnessError::Usage("--window 100% needs a file input, not stdin".into()))?;
                Some(n.max(2))
            }
            (true, _, Some(Window::Events(w))) | (_, true, Some(Window::Events(w))) => Some(w),
            (false, false, Some(_)) | (false, _, None) => None,
        };
        if algo.windowed() && window.is_some_and(|w| w < 2) {
            return Err(HarnessError::Usage("window must be at least 2".into()));
        }
        Ok(Setup { algo, window, scan: ScanMode::AllPairs, retention: Retention::Exact })
    }

    fn detector(&self, len: Option<u64>) -> Box<dyn RaceDetector> {
        let sp = |window| {
            Box::new(ShortSyncP::with_config(SpConfig { window, retention: self.retention, scan: self.scan }))
                as Box<dyn RaceDetector>
        };
        match self.algo {
            Algo::Ft => fasttrack_for(len),
            Algo::ShortFt => short_fasttrack_for(self.window.expect("resolved window") as usize),
            Algo::Syncp => sp(None),
            Algo::ShortSyncp => sp(Some(self.window.expect("resolved window") as usize)),
            Algo::OracleHb | Algo::OracleSp => unreachable!("oracles are not streaming detectors"),
        }
    }
}

fn coarsen(mut f: Findings, granularity: Granularity, first_race: bool) -> Findings {
    if first_race {
        // the earliest race by the later event, as a detector would stop there
        f.pairs.sort_by_key(|p| (p.j, p.i));
        f.pairs.truncate(1);
        f.racy_vars = f.pairs.iter().map(|p| p.var).collect();
        f.counters.races = f.pairs.len() as u64;
        f.pairs.sort();
    }
    match granularity {
        Granularity::Pairs => {}
        Granularity::Vars => f.pairs.clear(),
        Granularity::Decision => {
            f.pairs.clear();
            f.racy_vars.clear();
        }
    }
    f.counters.racy_vars = f.racy_vars.len() as u64;
    f
}

fn run_oracle(setup: &Setup, tr: &Trace, granularity: Granularity, first_race: bool) -> Result<Findings, HarnessError> {
    if let Some(v) = tr.check_well_formed().violation {
        return Err(HarnessError::IllFormed(v));
    }
    if tr.len() > oracle::MAX_ORACLE_EVENTS {
        return Err(HarnessError::Usage(format!(
            "oracles handle at most {} events, trace has {}",
            oracle::MAX_ORACLE_EVENTS,
            tr.len()
        )));
    }
    let pairs = match setup.algo {
        Algo::OracleHb => oracle::hb_pairs(tr),
        _ => oracle::sp_pairs(tr),
    };
    let pairs = match setup.window {
        Some(w) => oracle::filter_span(&pairs, w),
        None => pairs,
    };
    Ok(coarsen(Findings::from_pairs(pairs, tr.len() as u64), granularity, first_race))
}

struct Analysis {
    report: RaceReport,
    counters: Counters,
    trace_len: u64,
}

fn analyze_trace(setup: &Setup, tr: &Trace, opts: RunOptions) -> Result<Analysis, HarnessError> {
    let findings = if setup.algo.is_oracle() {
        run_oracle(setup, tr, opts.granularity, opts.first_race)?
    } else {
        run_trace(setup.detector(Some(tr.len() as u64)), tr, opts)?
    };
    let report = RaceReport::new(tr.content_hash(), setup.algo.name(), setup.window, &findings, tr.symbols());
    Ok(Analysis { counters: findings.counters, report, trace_len: tr.len() as u64 })
}

fn emit(text: &str, out: &Option<PathBuf>, io: &mut Io<'_>) -> Result<(), HarnessError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => io.stdout.write_all(text.as_bytes()).map_err(|e| HarnessError::io(Path::new("<stdout>"), e)),
    }
}

fn render(report: &RaceReport, format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Json => Ok(report.to_json()),
        Format::Csv => report.to_csv().map_err(|e| HarnessError::Internal(e.to_string())),
    }
}

fn cmd_run(a: &RunArgs, assert_invariants: bool, io: &mut Io<'_>) -> Result<i32, HarnessError> {
    let opts = RunOptions { granularity: a.output.report, first_race: a.output.first_race, assert_invariants };
    let scan = match a.scan {
        ScanArg::AllPairs => ScanMode::AllPairs,
        ScanArg::FirstPerPattern => ScanMode::FirstRacyPerPattern,
    };
    let retention = match a.retention {
        RetentionArg::Exact => Retention::Exact,
        RetentionArg::WindowOnly => Retention::WindowOnly,
    };
    let stdin = is_stdin(&a.input);
    if a.algo.is_oracle() && stdin {
        return Err(HarnessError::Usage("oracles need a trace file, not stdin".into()));
    }
    let start = Instant::now();
    let materialize = a.algo.is_oracle() || a.window == Some(Window::Full);
    let analysis = if materialize {
        let tr = if stdin {
            return Err(HarnessError::Usage("--window 100% needs a file input, not stdin".into()));
        } else {
            read_trace(a.input.as_deref().expect("file input"))?
        };
        let setup = Setup { scan, retention, ..Setup::resolve(a.algo, a.window, Some(tr.len() as u64))? };
        analyze_trace(&setup, &tr, opts)?
    } else {
        let setup = Setup { scan, retention, ..Setup::resolve(a.algo, a.window, None)? };
        let det = setup.detector(None);
        let (findings, stream) = if stdin {
            let (f, s) = run_stream(det, EventStream::new(&mut *io.stdin), opts)?;
            (f, (s.hash_so_far(), s.events_read(), s.into_symbols()))
        } else {
            let p = a.input.as_deref().expect("file input");
            let f = File::open(p).map_err(|e| HarnessError::io(p, e))?;
            let (f, s) = run_stream(det, EventStream::new(BufReader::new(f)), opts)?;
            (f, (s.hash_so_far(), s.events_read(), s.into_symbols()))
        };
        let (hash, n, symbols) = stream;
        let report = RaceReport::new(hash, a.algo.name(), setup.window, &findings, &symbols);
        Analysis { counters: findings.counters, report, trace_len: n }
    };
    let elapsed = start.elapsed();
    emit(&render(&analysis.report, a.output.format)?, &a.output.out, io)?;
    if a.output.stats {
        let c = &analysis.counters;
        let _ = writeln!(
            io.stderr,
            "events={} trace_len={} races={} racy_vars={} peak_records={} peak_live_clocks={} peak_retained={} wall_ms={:.3}",
            c.events,
            analysis.trace_len,
            c.races,
            c.racy_vars,
            c.peak_records,
            c.peak_live_clocks,
            c.peak_retained,
            elapsed.as_secs_f64() * 1e3
        );
    }
    Ok(if analysis.report.decision { EXIT_RACE } else { EXIT_CLEAN })
}

fn load_report(path: &Path) -> Result<RaceReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    RaceReport::from_json(&text).map_err(|source| HarnessError::BadReport { path: path.display().to_string(), source })
}

/// What a report claims about pairs of span at most `span`.
#[derive(Debug, PartialEq, Eq)]
pub struct ReportView {
    pub pairs: Vec<(u64, u64, String)>,
    pub vars: Vec<String>,
    pub decision: bool,
}

impl ReportView {
    pub fn new(r: &RaceReport, span: Option<u64>) -> Self {
        let keep = |p: &&ReportPair| span.is_none_or(|s| p.span <= s);
        let pairs: Vec<_> = r.pairs.iter().filter(keep).map(|p| (p.i, p.j, p.var.clone())).collect();
        // a report already bounded by `span` keeps its own summary; otherwise
        // the summary is rebuilt from the surviving pairs
        let bounded = match (span, r.window) {
            (None, _) => true,
            (Some(s), Some(w)) => w <= s,
            (Some(_), None) => false,
        };
        if bounded {
            ReportView { pairs, vars: r.racy_vars.clone(), decision: r.decision }
        } else {
            let mut vars: Vec<String> = pairs.iter().map(|p| p.2.clone()).collect();
            vars.sort();
            vars.dedup();
            ReportView { decision: !pairs.is_empty(), pairs, vars }
        }
    }
}

fn cmd_diff(a: &DiffArgs, io: &mut Io<'_>) -> Result<i32, HarnessError> {
    let ra = load_report(&a.a)?;
    let rb = load_report(&a.b)?;
    if ra.trace_hash != rb.trace_hash {
        return Err(HarnessError::HashMismatch(ra.trace_hash, rb.trace_hash));
    }
    let va = ReportView::new(&ra, a.span);
    let vb = ReportView::new(&rb, a.span);
    let mut agree = true;
    let mut line = |what: &str, ok: bool, detail: String| {
        agree &= ok;
        let verdict = if ok { "agree" } else { "DISAGREE" };
        writeln!(io.stdout, "{what}: {verdict}{detail}").map_err(|e| HarnessError::io(Path::new("<stdout>"), e))
    };
    line("decision", va.decision == vb.decision, format!(" ({} vs {})", va.decision, vb.decision))?;
    if a.level != DiffLevel::Decision {
        line("vars", va.vars == vb.vars, format!(" ({} vs {})", va.vars.len(), vb.vars.len()))?;
    }
    if a.level == DiffLevel::Pairs {
        let first = first_divergence(&va.pairs, &vb.pairs);
        let detail = match &first {
            None => format!(" ({} pairs)", va.pairs.len()),
            Some((p, side)) => format!("; first divergent pair ({}, {}, {}) only in {side}", p.0, p.1, p.2),
        };
        line("pairs", first.is_none(), detail)?;
    }
    Ok(if agree { EXIT_CLEAN } else { EXIT_RACE })
}

type Pair = (u64, u64, String);

fn first_divergence<'a>(a: &'a [Pair], b: &'a [Pair]) -> Option<(&'a Pair, &'static str)> {
    let only_a = a.iter().find(|p| !b.contains(p)).map(|p| (p, "A"));
    let only_b = b.iter().find(|p| !a.contains(p)).map(|p| (p, "B"));
    match (only_a, only_b) {
        (Some(x), Some(y)) => Some(if (x.0 .1, x.0 .0) <= (y.0 .1, y.0 .0) { x } else { y }),
        (x, y) => x.or(y),
    }
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub trace: String,
    pub config: String,
    pub events: u64,
    pub trace_len: u64,
    pub coverage: f64,
    pub races: u64,
    pub racy_vars: u64,
    pub peak_records: u64,
    pub peak_retained: u64,
    pub wall_ms: f64,
    pub status: String,
}

fn bench_one(name: &str, tr: &Result<Trace, String>, cfg: BenchConfig, a: &BenchArgs, assert: bool) -> BenchRow {
    let mut row = BenchRow {
        trace: name.to_owned(),
        config: cfg.to_string(),
        events: 0,
        trace_len: 0,
        coverage: 0.0,
        races: 0,
        racy_vars: 0,
        peak_records: 0,
        peak_retained: 0,
        wall_ms: 0.0,
        status: String::new(),
    };
    let tr = match tr {
        Ok(tr) => tr,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.trace_len = tr.len() as u64;
    let opts = RunOptions { granularity: a.report, first_race: false, assert_invariants: assert };
    let start = Instant::now();
    let result = Setup::resolve(cfg.algo, cfg.window, Some(tr.len() as u64)).and_then(|s| analyze_trace(&s, tr, opts));
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(an) => {
            let c = an.counters;
            row.events = c.events;
            row.coverage = if tr.is_empty() { 1.0 } else { c.events as f64 / tr.len() as f64 };
            row.races = c.races;
            row.racy_vars = c.racy_vars;
            row.peak_records = c.peak_records;
            row.peak_retained = c.peak_retained;
            row.wall_ms = if a.no_timing { 0.0 } else { ms };
            row.status = "ok".into();
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn default_configs() -> Vec<BenchConfig> {
    ["ft", "short-ft:3000", "syncp", "short-syncp:3000"].iter().map(|s| s.parse().expect("valid config")).collect()
}

fn cmd_bench(a: &BenchArgs, assert: bool, io: &mut Io<'_>) -> Result<i32, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.corpus)
        .map_err(|e| HarnessError::io(&a.corpus, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let configs = if a.configs.is_empty() { default_configs() } else { a.configs.clone() };
    let rows: Vec<BenchRow> = files
        .par_iter()
        .flat_map_iter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let tr = read_trace(p).map_err(|e| e.to_string());
            configs.iter().map(|&c| bench_one(&name, &tr, c, a, assert)).collect::<Vec<_>>()
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| HarnessError::Internal(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "trace",
            "config",
            "events",
            "trace_len",
            "coverage",
            "races",
            "racy_vars",
            "peak_records",
            "peak_retained",
            "wall_ms",
            "status",
        ])
        .map_err(|e| HarnessError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Internal(e.to_string()))?;
    emit(&String::from_utf8_lossy(&bytes), &a.out, io)?;
    Ok(EXIT_CLEAN)
}

fn cmd_gen(a: &GenArgs, io: &mut Io<'_>) -> Result<i32, HarnessError> {
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        for k in 0..a.count {
            let seed = a.seed + k;
            let path = dir.join(format!("trace_{seed:06}.trace"));
            let text = gen_text(a, seed, io)?;
            fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        }
        return Ok(EXIT_CLEAN);
    }
    match &a.out {
        // large traces are written incrementally
        Some(p) if a.plant_span.is_none() => {
            let gen = TraceGenerator::new(&a.params(a.seed))?;
            let f = File::create(p).map_err(|e| HarnessError::io(p, e))?;
            let mut w = io::BufWriter::new(f);
            let symbols = gen.symbols();
            for e in gen {
                writeln!(w, "{}", symbols.render(&e)).map_err(|e| HarnessError::io(p, e))?;
            }
            w.flush().map_err(|e| HarnessError::io(p, e))?;
        }
        out => {
            let text = gen_text(a, a.seed, io)?;
            emit(&text, out, io)?;
        }
    }
    Ok(EXIT_CLEAN)
}

fn gen_text(a: &GenArgs, seed: u64, io: &mut Io<'_>) -> Result<String, HarnessError> {
    let p = a.params(seed);
    match a.plant_span {
        Some(span) => {
            let (tr, (i, j)) = plant_short_race(&p, span)?;
            let _ = writeln!(io.stderr, "planted race ({i}, {j}) on {}", tr.symbols().var_name(tr.event(j as usize).op.var().expect("access")));
            Ok(tr.serialize())
        }
        None => Ok(gen_trace(&p)?.serialize()),
    }
}
