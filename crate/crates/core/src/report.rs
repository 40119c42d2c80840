//! Race findings, the sink detectors report into, and the JSON report form.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::trace::{span, Symbols, VarId};

/// A reported pair of conflicting accesses at trace indices `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RacePair {
    pub i: u64,
    pub j: u64,
    pub var: VarId,
}

impl RacePair {
    pub fn new(i: u64, j: u64, var: VarId) -> Self {
        debug_assert!(i < j);
        RacePair { i, j, var }
    }

    pub fn span(&self) -> u64 {
        span(self.i, self.j)
    }
}

/// How much of a run's output is kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Every distinct pair.
    #[default]
    Pairs,
    /// Racy variables and counts only.
    Vars,
    /// Only the yes/no answer (and counts).
    Decision,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairs" => Ok(Granularity::Pairs),
            "vars" => Ok(Granularity::Vars),
            "decision" => Ok(Granularity::Decision),
            other => Err(format!("unknown report granularity `{other}`")),
        }
    }
}

/// Receives pairs from a detector. Pairs for the same `j` arrive during one
/// step, so duplicates are removed per step.
#[derive(Debug)]
pub struct PairSink {
    granularity: Granularity,
    first_race: bool,
    pairs: Vec<RacePair>,
    racy_vars: BTreeSet<VarId>,
    count: u64,
    current_j: Option<u64>,
    current: Vec<(u64, VarId)>,
}

impl PairSink {
    pub fn new(granularity: Granularity, first_race: bool) -> Self {
        PairSink {
            granularity,
            first_race,
            pairs: Vec::new(),
            racy_vars: BTreeSet::new(),
            count: 0,
            current_j: None,
            current: Vec::new(),
        }
    }

    pub fn report(&mut self, i: u64, j: u64, var: VarId) {
        if self.current_j != Some(j) {
            self.current_j = Some(j);
            self.current.clear();
        }
        if self.current.contains(&(i, var)) {
            return;
        }
        self.current.push((i, var));
        self.count += 1;
        self.racy_vars.insert(var);
        if self.granularity == Granularity::Pairs {
            self.pairs.push(RacePair::new(i, j, var));
        }
    }

    /// True once the run may stop (first-race mode after a report).
    pub fn should_stop(&self) -> bool {
        self.first_race && self.count > 0
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self, counters: Counters) -> Findings {
        self.pairs.sort();
        let racy_vars = if self.granularity == Granularity::Decision { BTreeSet::new() } else { self.racy_vars };
        Findings { decision: self.count > 0, pairs: self.pairs, racy_vars, counters }
    }
}

/// Runtime counters of one run. Record counts are the detector's own
/// event-local metadata, not process memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub events: u64,
    pub races: u64,
    pub racy_vars: u64,
    pub peak_records: u64,
    pub peak_live_clocks: u64,
    pub peak_retained: u64,
}

/// Result of a detector or oracle run, in terms of interned ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Findings {
    pub pairs: Vec<RacePair>,
    pub racy_vars: BTreeSet<VarId>,
    pub decision: bool,
    pub counters: Counters,
}

impl Findings {
    /// Builds findings from an explicit (oracle) pair set.
    pub fn from_pairs(mut pairs: Vec<RacePair>, events: u64) -> Self {
        pairs.sort();
        pairs.dedup();
        let racy_vars: BTreeSet<VarId> = pairs.iter().map(|p| p.var).collect();
        let counters = Counters {
            events,
            races: pairs.len() as u64,
            racy_vars: racy_vars.len() as u64,
            ..Counters::default()
        };
        Findings { decision: !pairs.is_empty(), pairs, racy_vars, counters }
    }

    pub fn pair_set(&self) -> BTreeSet<(u64, u64)> {
        self.pairs.iter().map(|p| (p.i, p.j)).collect()
    }

    pub fn contains(&self, i: u64, j: u64) -> bool {
        self.pairs.iter().any(|p| p.i == i && p.j == j)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPair {
    pub i: u64,
    pub j: u64,
    pub var: String,
    pub span: u64,
}

/// Serialized report. Field order is fixed so output is byte-stable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceReport {
    pub trace_hash: String,
    pub algo: String,
    pub window: Option<u64>,
    pub decision: bool,
    pub pairs: Vec<ReportPair>,
    pub racy_vars: Vec<String>,
    pub counters: Counters,
}

impl RaceReport {
    pub fn new(trace_hash: String, algo: &str, window: Option<u64>, findings: &Findings, symbols: &Symbols) -> Self {
        let pairs = findings
            .pairs
            .iter()
            .map(|p| ReportPair { i: p.i, j: p.j, var: symbols.var_name(p.var).to_owned(), span: p.span() })
            .collect();
        let mut racy_vars: Vec<String> = findings.racy_vars.iter().map(|&x| symbols.var_name(x).to_owned()).collect();
        racy_vars.sort();
        RaceReport {
            trace_hash,
            algo: algo.to_owned(),
            window,
            decision: findings.decision,
            pairs,
            racy_vars,
            counters: findings.counters,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// CSV form: one row per pair.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "j", "var", "span"])?;
        for p in &self.pairs {
            w.serialize((p.i, p.j, &p.var, p.span))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
