//! Streams a long generated trace and reports how many event-local records
//! each windowed detector keeps at its peak.

use std::time::Instant;

use shortrace::detector::{Driver, RunOptions};
use shortrace::hb::ShortFastTrack;
use shortrace::report::Granularity;
use shortrace::sp::ShortSyncP;
use shortrace::tracegen::{GenParams, TraceGenerator};

fn main() {
    let length = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let p = GenParams { threads: 8, vars: 2000, locks: 4, length, lock_density: 0.1, seed: 1, ..GenParams::default() };
    let opts = RunOptions { granularity: Granularity::Vars, ..RunOptions::default() };

    for w in [1_000usize, 10_000] {
        let start = Instant::now();
        let mut d = Driver::new(ShortFastTrack::<i16>::new(w), opts);
        let mut peak = 0;
        for e in TraceGenerator::new(&p).expect("valid parameters") {
            d.feed(&e).expect("well-formed");
            peak = peak.max(d.detector().records());
        }
        let f = d.finish();
        println!("short-ft    w={w:>6}: peak records {peak:>6}, racy vars {:>5}, {:.2?}", f.racy_vars.len(), start.elapsed());

        let start = Instant::now();
        let mut d = Driver::new(ShortSyncP::new(w), opts);
        let mut peak = 0;
        for e in TraceGenerator::new(&p).expect("valid parameters") {
            d.feed(&e).expect("well-formed");
            peak = peak.max(d.detector().records());
        }
        let f = d.finish();
        println!(
            "short-syncp w={w:>6}: peak records {peak:>6}, retained sections {:>5}, racy vars {:>5}, {:.2?}",
            f.counters.peak_retained,
            f.racy_vars.len(),
            start.elapsed()
        );
    }
}
