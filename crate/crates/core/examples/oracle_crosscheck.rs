//! Checks the streaming detectors against brute-force oracles on random traces.

use shortrace::detector::{run_trace, RunOptions};
use shortrace::hb::short_fasttrack_for;
use shortrace::oracle;
use shortrace::sp::ShortSyncP;
use shortrace::tracegen::{gen_trace, GenParams};

fn main() {
    let opts = RunOptions { assert_invariants: true, ..RunOptions::default() };
    let (mut hb_ok, mut sp_ok, mut total) = (0, 0, 0);
    for seed in 0..200 {
        let p = GenParams { threads: 3, vars: 3, locks: 2, length: 60, lock_density: 0.3, seed, ..GenParams::default() };
        let tr = gen_trace(&p).expect("valid parameters");
        let hb = oracle::hb_pairs(&tr);
        let sp = oracle::sp_pairs(&tr);
        for w in [2usize, 5, 10] {
            total += 1;
            let short = oracle::filter_span(&hb, w as u64);
            let f = run_trace(short_fasttrack_for(w), &tr, opts).expect("well-formed");
            if f.decision == !short.is_empty() && f.pairs.iter().all(|p| short.contains(p)) {
                hb_ok += 1;
            }
            let g = run_trace(ShortSyncP::new(w), &tr, opts).expect("well-formed");
            if g.pairs == oracle::filter_span(&sp, w as u64) {
                sp_ok += 1;
            }
        }
    }
    println!("short-ft agrees with the HB oracle on {hb_ok}/{total} runs");
    println!("short-syncp agrees with the SP oracle on {sp_ok}/{total} runs");
}
