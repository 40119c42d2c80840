//! Builds JSON reports from two detectors and compares them within a span bound.

use shortrace::detector::{run_trace, RunOptions};
use shortrace::harness::ReportView;
use shortrace::hb::{FastTrack, ShortFastTrack};
use shortrace::report::RaceReport;
use shortrace::tracegen::{gen_trace, GenParams};

fn main() {
    let p = GenParams { threads: 3, vars: 4, locks: 2, length: 400, lock_density: 0.3, seed: 12, ..GenParams::default() };
    let tr = gen_trace(&p).expect("valid parameters");
    let opts = RunOptions::default();
    let w = 8;

    let full = run_trace(FastTrack::<i32>::new(), &tr, opts).expect("well-formed");
    let short = run_trace(ShortFastTrack::<i8>::new(w), &tr, opts).expect("well-formed");
    let a = RaceReport::new(tr.content_hash(), "ft", None, &full, tr.symbols());
    let b = RaceReport::new(tr.content_hash(), "short-ft", Some(w as u64), &short, tr.symbols());
    print!("{}", b.to_json().lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    let va = ReportView::new(&a, Some(w as u64));
    let vb = ReportView::new(&b, Some(w as u64));
    println!("decision agrees: {}", va.decision == vb.decision);
    println!("racy variables agree: {} ({:?})", va.vars == vb.vars, vb.vars);
    println!("pairs within span {w}: ft {} vs short-ft {}", va.pairs.len(), vb.pairs.len());
}
