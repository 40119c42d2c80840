//! Brute-force race semantics computed directly from the definitions, used
//! as ground truth for the streaming detectors. Nothing here shares code
//! with the detectors; costs are quadratic or cubic in the trace length.

use fixedbitset::FixedBitSet;

use crate::report::RacePair;
use crate::trace::{conflicting, Op, Trace};

/// Largest trace the oracles accept.
pub const MAX_ORACLE_EVENTS: usize = 500;

fn check_size(tr: &Trace) {
    assert!(tr.len() <= MAX_ORACLE_EVENTS, "oracle input has {} events (limit {MAX_ORACLE_EVENTS})", tr.len());
}

/// A set of trace positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSet(FixedBitSet);

impl EventSet {
    pub fn empty(n: usize) -> Self {
        EventSet(FixedBitSet::with_capacity(n))
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in idx {
            s.0.insert(i);
        }
        s
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(i)
    }

    pub fn insert(&mut self, i: usize) -> bool {
        let fresh = !self.0.contains(i);
        self.0.insert(i);
        fresh
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    /// Per-thread count of member events, which for thread-order downward
    /// closed sets determines the set.
    pub fn cut(&self, tr: &Trace) -> Vec<u32> {
        let mut c = vec![0u32; tr.num_threads()];
        for i in self.iter() {
            c[tr.event(i).tid.index()] += 1;
        }
        c
    }
}

fn prev_of(tr: &Trace, i: usize) -> Option<usize> {
    let t = tr.event(i).tid;
    (0..i).rev().find(|&j| tr.event(j).tid == t)
}

fn last_write_of(tr: &Trace, i: usize) -> Option<usize> {
    let Op::Read(x) = tr.event(i).op else { return None };
    (0..i).rev().find(|&j| tr.event(j).op == Op::Write(x))
}

fn match_of(tr: &Trace, a: usize) -> Option<usize> {
    let e = tr.event(a);
    let Op::Acquire(l) = e.op else { return None };
    (a + 1..tr.len()).find(|&j| tr.event(j).tid == e.tid && tr.event(j).op == Op::Release(l))
}

/// The happens-before order as explicit predecessor sets.
pub struct HbRelation {
    pred: Vec<FixedBitSet>,
}

impl HbRelation {
    pub fn new(tr: &Trace) -> Self {
        check_size(tr);
        let n = tr.len();
        let mut pred: Vec<FixedBitSet> = Vec::with_capacity(n);
        for j in 0..n {
            let mut p = FixedBitSet::with_capacity(n);
            if let Some(q) = prev_of(tr, j) {
                p.union_with(&pred[q]);
                p.insert(q);
            }
            if let Op::Acquire(l) = tr.event(j).op {
                for (r, pr) in pred.iter().enumerate() {
                    if tr.event(r).op == Op::Release(l) {
                        p.union_with(pr);
                        p.insert(r);
                    }
                }
            }
            pred.push(p);
        }
        HbRelation { pred }
    }

    /// `i` happens before `j` (strictly).
    pub fn ordered(&self, i: usize, j: usize) -> bool {
        self.pred[j].contains(i)
    }
}

fn conflicting_pairs(tr: &Trace) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = tr.len();
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| conflicting(tr.event(i), tr.event(j)))
}

fn pair(tr: &Trace, i: usize, j: usize) -> RacePair {
    RacePair::new(i as u64, j as u64, tr.event(i).op.var().expect("access"))
}

/// Every conflicting pair unordered by happens-before, sorted.
pub fn hb_pairs(tr: &Trace) -> Vec<RacePair> {
    let hb = HbRelation::new(tr);
    conflicting_pairs(tr).filter(|&(i, j)| !hb.ordered(i, j)).map(|(i, j)| pair(tr, i, j)).collect()
}

/// Smallest set containing `s` that is closed under thread-order
/// predecessors and under last writes of member reads.
pub fn tl_closure(tr: &Trace, s: &EventSet) -> EventSet {
    check_size(tr);
    let mut out = s.clone();
    let mut work: Vec<usize> = s.iter().collect();
    while let Some(i) = work.pop() {
        for dep in [prev_of(tr, i), last_write_of(tr, i)].into_iter().flatten() {
            if out.insert(dep) {
                work.push(dep);
            }
        }
    }
    out
}

/// Adds the release of every member acquire that is followed by another
/// member acquire of the same lock. Returns whether anything was added.
fn add_forced_releases(tr: &Trace, s: &mut EventSet) -> bool {
    let mut grew = false;
    for a1 in s.iter().collect::<Vec<_>>() {
        let Op::Acquire(l) = tr.event(a1).op else { continue };
        let later = s.iter().any(|a2| a2 > a1 && tr.event(a2).op == Op::Acquire(l));
        if later {
            if let Some(r) = match_of(tr, a1) {
                grew |= s.insert(r);
            }
        }
    }
    grew
}

/// Sync-preserving closure of `s`.
pub fn sp_closure(tr: &Trace, s: &EventSet) -> EventSet {
    let mut cur = tl_closure(tr, s);
    while add_forced_releases(tr, &mut cur) {
        cur = tl_closure(tr, &cur);
    }
    cur
}

/// Closure of the thread predecessors of `i1` and `i2`.
pub fn sp_ideal(tr: &Trace, i1: usize, i2: usize) -> EventSet {
    let seed = EventSet::from_indices(tr.len(), [prev_of(tr, i1), prev_of(tr, i2)].into_iter().flatten());
    sp_closure(tr, &seed)
}

/// Every conflicting pair whose ideal contains neither event, sorted.
pub fn sp_pairs(tr: &Trace) -> Vec<RacePair> {
    conflicting_pairs(tr)
        .filter(|&(i, j)| {
            let ideal = sp_ideal(tr, i, j);
            !ideal.contains(i) && !ideal.contains(j)
        })
        .map(|(i, j)| pair(tr, i, j))
        .collect()
}

/// Pairs with span at most `w`.
pub fn filter_span(pairs: &[RacePair], w: u64) -> Vec<RacePair> {
    pairs.iter().copied().filter(|p| p.span() <= w).collect()
}
