//! Happens-before detectors: the whole-trace vector-clock baseline and its
//! windowed variant for short races.

mod fasttrack;
mod short_fasttrack;

pub use fasttrack::FastTrack;
pub use short_fasttrack::{ClockRef, ShortFastTrack};

use crate::clocks::ClockWidth;
use crate::detector::RaceDetector;

/// Baseline detector with clocks wide enough for `max_events` events per
/// thread (`None`: unknown length, 64-bit clocks).
pub fn fasttrack_for(max_events: Option<u64>) -> Box<dyn RaceDetector> {
    match max_events.map(ClockWidth::for_max).unwrap_or(ClockWidth::W64) {
        ClockWidth::W8 => Box::new(FastTrack::<i8>::new()),
        ClockWidth::W16 => Box::new(FastTrack::<i16>::new()),
        ClockWidth::W32 => Box::new(FastTrack::<i32>::new()),
        ClockWidth::W64 => Box::new(FastTrack::<i64>::new()),
    }
}

/// Windowed detector whose clocks use the narrowest width holding `w - 1`.
pub fn short_fasttrack_for(w: usize) -> Box<dyn RaceDetector> {
    match ClockWidth::for_max(w as u64 - 1) {
        ClockWidth::W8 => Box::new(ShortFastTrack::<i8>::new(w)),
        ClockWidth::W16 => Box::new(ShortFastTrack::<i16>::new(w)),
        ClockWidth::W32 => Box::new(ShortFastTrack::<i32>::new(w)),
        ClockWidth::W64 => Box::new(ShortFastTrack::<i64>::new(w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clocks::Epoch;
    use crate::detector::{run_trace, RunOptions};
    use crate::oracle;
    use crate::report::{Findings, Granularity, PairSink};
    use crate::trace::{Op, ThreadId, Trace, VarId};
    use crate::tracegen::{gen_trace, GenParams};

    const FOUR_EVENTS: &str = "T1|w(y)\nT1|w(x)\nT2|w(x)\nT2|w(y)\n";
    const BRIDGED: &str = "T1|w(x)\nT1|rel(l)\nT2|acq(l)\nT2|w(x)\n";

    fn opts() -> RunOptions {
        RunOptions { granularity: Granularity::Pairs, first_race: false, assert_invariants: true }
    }

    fn ft(tr: &Trace) -> Findings {
        run_trace(FastTrack::<i32>::new(), tr, opts()).unwrap()
    }

    fn sft(tr: &Trace, w: usize) -> Findings {
        run_trace(ShortFastTrack::<i32>::new(w), tr, opts()).unwrap()
    }

    #[test]
    fn fasttrack_reports_both_example_races() {
        let tr = Trace::parse(FOUR_EVENTS).unwrap();
        let f = ft(&tr);
        assert_eq!(f.pair_set(), [(0, 3), (1, 2)].into_iter().collect());
    }

    #[test]
    fn release_acquire_orders_writes() {
        // the bridged trace is ill-formed on its own (release without acquire),
        // so it is preceded by the matching acquire
        let tr = Trace::parse(&format!("T1|acq(l)\n{BRIDGED}")).unwrap();
        assert!(!ft(&tr).decision);
        assert!(!sft(&tr, 4).decision);
        assert!(!sft(&tr, 5).decision);
    }

    #[test]
    fn single_thread_is_race_free() {
        let tr = gen_trace(&GenParams { threads: 1, length: 80, seed: 9, ..GenParams::default() }).unwrap();
        assert!(!ft(&tr).decision);
        assert!(!sft(&tr, 3).decision);
    }

    #[test]
    fn window_two_misses_the_long_race() {
        let tr = Trace::parse(FOUR_EVENTS).unwrap();
        let f = sft(&tr, 2);
        assert_eq!(f.pair_set(), [(1, 2)].into_iter().collect());
        assert_eq!(f.pairs[0].var, VarId(1));
        assert!(sft(&tr, 4).contains(0, 3));
    }

    #[test]
    fn eviction_clears_write_epoch() {
        let tr = Trace::parse(FOUR_EVENTS).unwrap();
        let mut d = ShortFastTrack::<i8>::new(2);
        let mut sink = PairSink::new(Granularity::Pairs, false);
        let y = VarId(0);
        d.activate(tr.event(0), &mut sink);
        d.activate(tr.event(1), &mut sink);
        assert_eq!(d.write_epoch(y), Some(Epoch::new(ThreadId(0), 0)));
        d.activate(tr.event(2), &mut sink);
        assert_eq!(d.write_epoch(y), None);
    }

    #[test]
    fn circular_comparison_example() {
        // two fillers and the acquire put T1|w(x) in slot 3; rel, acq and the
        // second write wrap around to slots 0, 1, 2
        let text = "T3|r(a)\nT3|r(a)\nT1|acq(l)\nT1|w(x)\nT1|rel(l)\nT2|acq(l)\nT2|w(x)\n";
        let tr = Trace::parse(text).unwrap();
        let mut d = ShortFastTrack::<i8>::new(4);
        let mut sink = PairSink::new(Granularity::Pairs, false);
        for e in &tr.events()[..6] {
            d.activate(e, &mut sink);
        }
        let x = tr.symbols().lookup_var("x").unwrap();
        let t1 = ThreadId(1);
        let t2 = ThreadId(2);
        assert_eq!(d.write_epoch(x), Some(Epoch::new(t1, 3)));
        assert_eq!(d.thread_clock(t2).get(t1), 0);
        d.activate(tr.event(6), &mut sink);
        assert_eq!(d.head(), 2);
        assert_eq!(sink.count(), 0);
    }

    #[test]
    fn invariants_hold_with_all_widths() {
        for seed in 0..40 {
            let p = GenParams { threads: 4, vars: 3, locks: 2, length: 120, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            for w in [2usize, 3, 7, 16, 200] {
                let a = run_trace(short_fasttrack_for(w), &tr, opts()).unwrap();
                let b = run_trace(ShortFastTrack::<i64>::new(w), &tr, opts()).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn full_window_matches_baseline() {
        for seed in 0..100 {
            let p = GenParams { threads: 3, vars: 3, locks: 2, length: 100, lock_density: 0.35, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let a = ft(&tr);
            let b = sft(&tr, tr.len().max(2));
            assert_eq!(a.decision, b.decision, "seed {seed}");
            assert_eq!(a.racy_vars, b.racy_vars, "seed {seed}");
        }
    }

    #[test]
    fn windowed_reports_are_sound_and_decision_complete() {
        for seed in 0..150 {
            let p = GenParams { threads: 3, vars: 3, locks: 2, length: 90, lock_density: 0.35, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let truth = oracle::hb_pairs(&tr);
            for w in [2usize, 3, 5, 9, 30] {
                let f = sft(&tr, w);
                let short = oracle::filter_span(&truth, w as u64);
                for p in &f.pairs {
                    assert!(short.contains(p), "seed {seed} w {w}: unsound {p:?}");
                }
                assert_eq!(f.decision, !short.is_empty(), "seed {seed} w {w}");
            }
        }
    }

    /// Recomputes what each clock should hold from the resident events alone.
    #[test]
    fn state_matches_recomputation_from_window() {
        for seed in 0..60 {
            let p = GenParams { threads: 3, vars: 2, locks: 2, length: 100, lock_density: 0.4, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let hb = oracle::HbRelation::new(&tr);
            for w in [3usize, 6, 11] {
                let mut d = ShortFastTrack::<i16>::new(w);
                let mut sink = PairSink::new(Granularity::Pairs, false);
                for j in 0..tr.len() {
                    d.activate(tr.event(j), &mut sink);
                    let lo = (j + 1).saturating_sub(w);
                    let slot_of = |i: usize| -> i64 { (i % w) as i64 };
                    for t in 0..tr.num_threads() {
                        let t = ThreadId(t as u32);
                        let last_of_t = (lo..=j).rev().find(|&k| tr.event(k).tid == t);
                        let clock = d.thread_clock(t);
                        for u in 0..tr.num_threads() {
                            let u = ThreadId(u as u32);
                            let expect = last_of_t.and_then(|e| {
                                (lo..=e).rev().find(|&r| {
                                    let ev = tr.event(r);
                                    ev.tid == u && matches!(ev.op, Op::Release(_)) && (r == e || hb.ordered(r, e))
                                })
                            });
                            assert_eq!(clock.get(u) as i64, expect.map(slot_of).unwrap_or(-1), "seed {seed} w {w} j {j}");
                        }
                    }
                    for x in 0..tr.num_vars() {
                        let x = VarId(x as u32);
                        let lw = (lo..=j).rev().find(|&k| tr.event(k).op == Op::Write(x));
                        assert_eq!(
                            d.write_epoch(x).map(|ep| ep.clock as i64),
                            lw.map(slot_of),
                            "seed {seed} w {w} j {j}"
                        );
                        let any_read = (lo..=j).any(|k| tr.event(k).op == Op::Read(x));
                        assert_eq!(d.read_clock(x).is_some(), any_read);
                    }
                }
            }
        }
    }
}
