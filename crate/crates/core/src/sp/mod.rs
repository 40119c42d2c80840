//! Sync-preserving detectors. The whole-trace baseline is the windowed
//! engine with an unbounded window.

mod short_syncp;
pub mod tlc;

pub use short_syncp::{Retention, ScanMode, ShortSyncP, SpConfig};
pub use tlc::Tlc;

/// Whole-trace sync-preserving detector.
pub fn syncp() -> ShortSyncP {
    ShortSyncP::unbounded()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{run_trace, RaceDetector, RunOptions};
    use crate::oracle::{self, EventSet};
    use crate::report::{Findings, Granularity, PairSink, RacePair};
    use crate::trace::{LockId, Trace};
    use crate::tracegen::{gen_trace, with_noise_prefix, GenParams};

    const SIGMA1: &str = "T3|acq(l)\nT1|w(y)\nT2|r(y)\nT1|w(x)\nT3|r(x)\nT3|rel(l)\nT2|acq(l)\nT2|rel(l)\nT2|w(x)\n";
    const SIGMA1_T3: &str = "T3|acq(l)\nT3|w(y)\nT2|r(y)\nT1|w(x)\nT3|r(x)\nT3|rel(l)\nT2|acq(l)\nT2|rel(l)\nT2|w(x)\n";
    const SIGMA2: &str = "T3|acq(l)\nT1|w(x)\nT3|r(x)\nT3|rel(l)\nT2|acq(l)\nT2|rel(l)\nT2|w(x)\n";

    fn opts(granularity: Granularity) -> RunOptions {
        RunOptions { granularity, first_race: false, assert_invariants: true }
    }

    fn run(tr: &Trace, cfg: SpConfig) -> Findings {
        run_trace(ShortSyncP::with_config(cfg), tr, opts(Granularity::Pairs)).unwrap()
    }

    fn windowed(w: usize) -> SpConfig {
        SpConfig { window: Some(w), ..SpConfig::default() }
    }

    fn truth(tr: &Trace, w: Option<usize>) -> Vec<RacePair> {
        let all = oracle::sp_pairs(tr);
        match w {
            Some(w) => oracle::filter_span(&all, w as u64),
            None => all,
        }
    }

    #[test]
    fn sigma2_needs_a_window_of_six() {
        let tr = Trace::parse(SIGMA2).unwrap();
        for w in [7usize, 8, 100] {
            assert!(run(&tr, windowed(w)).contains(1, 6), "w {w}");
        }
        assert!(run(&tr, SpConfig::default()).contains(1, 6));
        assert!(!run(&tr, windowed(3)).contains(1, 6));
        // the pair spans six events
        assert!(run(&tr, windowed(6)).contains(1, 6));
        assert!(!run(&tr, windowed(5)).contains(1, 6));
    }

    #[test]
    fn sigma1_variants() {
        let tr = Trace::parse(SIGMA1).unwrap();
        assert!(run(&tr, SpConfig::default()).contains(3, 8));
        let tr = Trace::parse(SIGMA1_T3).unwrap();
        let f = run(&tr, SpConfig::default());
        assert!(!f.contains(3, 8));
        assert!(f.contains(1, 2));
    }

    #[test]
    fn trivial_traces_are_race_free() {
        let empty = Trace::parse("").unwrap();
        assert!(!run(&empty, SpConfig::default()).decision);
        let single = gen_trace(&GenParams { threads: 1, length: 60, seed: 4, ..GenParams::default() }).unwrap();
        assert!(!run(&single, windowed(5)).decision);
    }

    #[test]
    fn thread_timestamps_are_tl_closures() {
        for seed in 0..80 {
            let p = GenParams { threads: 4, vars: 3, locks: 2, length: 70, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            for cfg in [SpConfig::default(), windowed(5)] {
                let mut d = ShortSyncP::with_config(cfg);
                let mut sink = PairSink::new(Granularity::Pairs, false);
                for (i, e) in tr.events().iter().enumerate() {
                    d.activate(e, &mut sink);
                    let mut expect = oracle::tl_closure(&tr, &EventSet::from_indices(tr.len(), [i])).cut(&tr);
                    let mut got = d.thread_clock(e.tid).cuts().to_vec();
                    let n = expect.len().max(got.len());
                    expect.resize(n, 0);
                    got.resize(n, 0);
                    assert_eq!(got, expect, "seed {seed} event {i}");
                }
            }
        }
    }

    #[test]
    fn whole_trace_matches_oracle() {
        for seed in 0..150 {
            let p = GenParams { threads: 3, vars: 3, locks: 2, length: 80, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let f = run(&tr, SpConfig::default());
            assert_eq!(f.pairs, truth(&tr, None), "seed {seed}\n{}", tr.serialize());
        }
    }

    #[test]
    fn windowed_matches_filtered_oracle() {
        for seed in 0..150 {
            let p = GenParams {
                threads: 3,
                vars: 3,
                locks: 2,
                length: 90,
                lock_density: 0.45,
                cs_mean_len: 5.0,
                allow_dangling: seed % 3 == 0,
                seed,
                ..GenParams::default()
            };
            let tr = gen_trace(&p).unwrap();
            for w in [2usize, 3, 5, 8, 13, 40] {
                let f = run(&tr, windowed(w));
                assert_eq!(f.pairs, truth(&tr, Some(w)), "seed {seed} w {w}\n{}", tr.serialize());
            }
        }
    }

    #[test]
    fn coarse_granularities_match_oracle() {
        for seed in 0..60 {
            let p = GenParams { threads: 3, vars: 4, locks: 2, length: 80, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            for w in [4usize, 10] {
                let expect = Findings::from_pairs(truth(&tr, Some(w)), tr.len() as u64);
                for scan in [ScanMode::AllPairs, ScanMode::FirstRacyPerPattern] {
                    let cfg = SpConfig { window: Some(w), scan, ..SpConfig::default() };
                    let vars = run_trace(ShortSyncP::with_config(cfg), &tr, opts(Granularity::Vars)).unwrap();
                    assert_eq!(vars.racy_vars, expect.racy_vars, "seed {seed} w {w} {scan:?}");
                    let dec = run_trace(ShortSyncP::with_config(cfg), &tr, opts(Granularity::Decision)).unwrap();
                    assert_eq!(dec.decision, expect.decision);
                    let pairs = run(&tr, cfg);
                    for p in &pairs.pairs {
                        assert!(expect.pairs.contains(p));
                    }
                }
            }
        }
    }

    /// `T1|acq(l)`, padding on fresh variables, then a racy or protected pair.
    fn straddling(pad: usize, protected: bool) -> Trace {
        let mut s = String::from("T1|acq(l)\n");
        for k in 0..pad {
            s += &format!("T3|w(p{k})\n");
        }
        s += "T1|w(x)\n";
        if protected {
            s += "T1|rel(l)\nT2|acq(l)\nT2|w(x)\nT2|rel(l)\n";
        } else {
            s += "T2|w(x)\nT1|rel(l)\n";
        }
        Trace::parse(&s).unwrap()
    }

    #[test]
    fn spilled_acquire_is_replayed() {
        for pad in [1usize, 4, 9] {
            for protected in [false, true] {
                let tr = straddling(pad, protected);
                for w in [2usize, 3, 4] {
                    let f = run(&tr, windowed(w));
                    assert_eq!(f.pairs, truth(&tr, Some(w)), "pad {pad} protected {protected} w {w}");
                }
            }
        }
        let tr = straddling(4, true);
        let mut d = ShortSyncP::new(3);
        let mut sink = PairSink::new(Granularity::Pairs, false);
        for e in &tr.events()[..5] {
            d.activate(e, &mut sink);
        }
        assert_eq!(d.open_acquire(LockId(0)), Some(0));
        for e in &tr.events()[5..7] {
            d.activate(e, &mut sink);
        }
        assert_eq!(d.open_acquire(LockId(0)), None);
    }

    #[test]
    fn dangling_acquire_spills_once() {
        let tr = Trace::parse("T1|acq(l)\nT1|w(a)\nT2|w(b)\nT2|w(c)\nT2|acq(m)\n").unwrap();
        let mut d = ShortSyncP::new(2);
        let mut sink = PairSink::new(Granularity::Pairs, false);
        for e in tr.events() {
            d.activate(e, &mut sink);
            d.check_invariants().unwrap();
        }
        assert_eq!(d.open_acquire(LockId(0)), Some(0));
        assert_eq!(d.open_acquire(LockId(1)), None);
        assert!(d.records() <= 2 + 2);
    }

    /// A critical section that has left the window entirely still decides
    /// the verdict: `T2|r(b)` cuts into the section of `T3` on `l`, and only
    /// that section's release brings in `T4|acq(m)`, whose release in turn
    /// reads `T1|w(x)`.
    const EVICTED_SECTION: &str = "\
T4|acq(m)
T4|w(a)
T3|acq(l)
T3|w(b)
T3|r(a)
T3|rel(l)
T2|r(b)
T2|acq(l)
T2|rel(l)
T1|w(x)
T4|r(x)
T4|rel(m)
T2|acq(m)
T2|rel(m)
T2|w(x)
";

    #[test]
    fn window_only_retention_is_not_enough() {
        let tr = Trace::parse(EVICTED_SECTION).unwrap();
        let ideal = oracle::sp_ideal(&tr, 9, 14);
        assert!(ideal.contains(9) && ideal.contains(5));
        for w in [6usize, 9, 15] {
            let exact = run(&tr, windowed(w));
            assert_eq!(exact.pairs, truth(&tr, Some(w)), "w {w}");
            assert!(!exact.contains(9, 14));
        }
        let literal = SpConfig { window: Some(9), retention: Retention::WindowOnly, ..SpConfig::default() };
        assert!(run(&tr, literal).contains(9, 14));
    }

    #[test]
    fn noise_prefix_keeps_verdicts() {
        for seed in 0..40 {
            let p = GenParams { threads: 3, vars: 3, locks: 2, length: 60, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let noisy = with_noise_prefix(&tr, 25, seed);
            let shift = (noisy.len() - tr.len()) as u64;
            let base: Vec<(u64, u64)> = run(&tr, SpConfig::default()).pairs.iter().map(|p| (p.i, p.j)).collect();
            let names: Vec<_> = (0..tr.num_vars()).map(|x| tr.symbols().var_name(crate::trace::VarId(x as u32)).to_string()).collect();
            let shifted: Vec<(u64, u64)> = run(&noisy, SpConfig::default())
                .pairs
                .iter()
                .filter(|p| p.i >= shift && names.contains(&noisy.symbols().var_name(p.var).to_string()))
                .map(|p| (p.i - shift, p.j - shift))
                .collect();
            assert_eq!(base, shifted, "seed {seed}");
        }
    }

    #[test]
    fn retained_sections_are_collected() {
        let p = GenParams { threads: 4, vars: 6, locks: 3, length: 20_000, lock_density: 0.5, seed: 11, ..GenParams::default() };
        let tr = gen_trace(&p).unwrap();
        let mut d = ShortSyncP::new(16);
        let mut sink = PairSink::new(Granularity::Decision, false);
        for e in tr.events() {
            d.activate(e, &mut sink);
        }
        d.gc();
        d.check_invariants().unwrap();
        assert!(d.records() <= 16 + 3);
        assert!(d.retained() < 1000, "retained {}", d.retained());
    }
}
