//! Seeded generation of well-formed random traces.
//!
//! Each step picks a thread uniformly. A thread holding locks releases its
//! innermost one with probability `1 / cs_mean_len`, so critical-section
//! bodies have geometric length; otherwise it acquires a free lock with
//! probability `lock_density` or accesses a random variable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace::{Event, LockId, Op, Symbols, ThreadId, Trace, VarId};

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub threads: usize,
    pub vars: usize,
    pub locks: usize,
    pub length: usize,
    pub lock_density: f64,
    pub read_bias: f64,
    /// Mean number of events a critical section stays open for its thread.
    pub cs_mean_len: f64,
    /// Leave locks held at the end instead of closing them.
    pub allow_dangling: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            threads: 2,
            vars: 2,
            locks: 1,
            length: 20,
            lock_density: 0.2,
            read_bias: 0.5,
            cs_mean_len: 4.0,
            allow_dangling: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GenError {
    #[error("at least one thread is required")]
    NoThreads,
    #[error("lock density {0} requires at least one lock")]
    NoLocks(f64),
    #[error("accesses require at least one variable")]
    NoVars,
    #[error("probability `{0}` must lie in [0, 1]")]
    BadProbability(&'static str),
    #[error("mean critical-section length must be at least 1")]
    BadCsLength,
    #[error("cannot plant a race of span {span}: {reason}")]
    InfeasibleSpan { span: usize, reason: &'static str },
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.threads == 0 {
            return Err(GenError::NoThreads);
        }
        if !(0.0..=1.0).contains(&self.lock_density) {
            return Err(GenError::BadProbability("lock_density"));
        }
        if !(0.0..=1.0).contains(&self.read_bias) {
            return Err(GenError::BadProbability("read_bias"));
        }
        if self.lock_density > 0.0 && self.locks == 0 {
            return Err(GenError::NoLocks(self.lock_density));
        }
        if self.vars == 0 {
            return Err(GenError::NoVars);
        }
        if self.cs_mean_len.is_nan() || self.cs_mean_len < 1.0 {
            return Err(GenError::BadCsLength);
        }
        Ok(())
    }
}

/// Symbol table with threads `T1..`, variables `x0..` and locks `l0..`
/// interned in order, so ids equal name suffixes.
fn standard_symbols(threads: usize, vars: usize, locks: usize) -> Symbols {
    let mut sym = Symbols::new();
    for t in 0..threads {
        sym.thread(&format!("T{}", t + 1));
    }
    for x in 0..vars {
        sym.var(&format!("x{x}")).expect("fresh variable name");
    }
    for l in 0..locks {
        sym.lock(&format!("l{l}")).expect("fresh lock name");
    }
    sym
}

/// Streaming generator; yields exactly `length` events.
pub struct TraceGenerator {
    p: GenParams,
    rng: ChaCha8Rng,
    held: Vec<Vec<LockId>>,
    holder: Vec<Option<ThreadId>>,
    open: usize,
    emitted: usize,
}

impl TraceGenerator {
    pub fn new(p: &GenParams) -> Result<Self, GenError> {
        p.validate()?;
        Ok(TraceGenerator {
            rng: ChaCha8Rng::seed_from_u64(p.seed),
            held: vec![Vec::new(); p.threads],
            holder: vec![None; p.locks],
            open: 0,
            emitted: 0,
            p: p.clone(),
        })
    }

    pub fn symbols(&self) -> Symbols {
        standard_symbols(self.p.threads, self.p.vars, self.p.locks)
    }

    fn release(&mut self, t: usize) -> Op {
        let l = self.held[t].pop().expect("thread holds a lock");
        self.holder[l.index()] = None;
        self.open -= 1;
        Op::Release(l)
    }

    fn next_op(&mut self) -> (usize, Op) {
        let remaining = self.p.length - self.emitted;
        if !self.p.allow_dangling && remaining <= self.open {
            let t = (0..self.p.threads).find(|&t| !self.held[t].is_empty()).expect("some lock is open");
            return (t, self.release(t));
        }
        let t = self.rng.gen_range(0..self.p.threads);
        if !self.held[t].is_empty() && self.rng.gen_bool(1.0 / self.p.cs_mean_len) {
            return (t, self.release(t));
        }
        // leave room to close every lock before the end
        let can_open = self.p.allow_dangling || remaining > self.open + 2;
        if can_open && self.p.locks > 0 && self.rng.gen_bool(self.p.lock_density) {
            let free: Vec<usize> = (0..self.p.locks).filter(|&l| self.holder[l].is_none()).collect();
            if let Some(&l) = free.choose(&mut self.rng) {
                self.holder[l] = Some(ThreadId(t as u32));
                self.held[t].push(LockId(l as u32));
                self.open += 1;
                return (t, Op::Acquire(LockId(l as u32)));
            }
        }
        let x = VarId(self.rng.gen_range(0..self.p.vars) as u32);
        let op = if self.rng.gen_bool(self.p.read_bias) { Op::Read(x) } else { Op::Write(x) };
        (t, op)
    }
}

impl Iterator for TraceGenerator {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.emitted >= self.p.length {
            return None;
        }
        let (t, op) = self.next_op();
        let e = Event::new(self.emitted as u64, ThreadId(t as u32), op);
        self.emitted += 1;
        Some(e)
    }
}

pub fn gen_trace(p: &GenParams) -> Result<Trace, GenError> {
    let g = TraceGenerator::new(p)?;
    let symbols = g.symbols();
    Ok(Trace::from_parts(g.collect(), symbols))
}

/// True if an HB path leads from the event at `i` to the event at `j`.
/// Only the events in between matter, so this is a single forward pass.
fn hb_path(tr: &Trace, i: usize, j: usize) -> bool {
    let src = tr.event(i).tid;
    let dst = tr.event(j).tid;
    if src == dst {
        return true;
    }
    let mut reached = vec![false; tr.num_threads()];
    let mut carrying = vec![false; tr.num_locks()];
    reached[src.index()] = true;
    for e in &tr.events()[i + 1..j] {
        match e.op {
            Op::Release(l) if reached[e.tid.index()] => carrying[l.index()] = true,
            Op::Acquire(l) if carrying[l.index()] => reached[e.tid.index()] = true,
            _ => {}
        }
    }
    reached[dst.index()]
}

/// Generates a trace from `p` and inserts two writes to a fresh variable at
/// distance `target_span`, chosen so that no HB path connects them. Returns
/// the trace and the planted pair's indices.
pub fn plant_short_race(p: &GenParams, target_span: usize) -> Result<(Trace, (u64, u64)), GenError> {
    if target_span < 2 {
        return Err(GenError::InfeasibleSpan { span: target_span, reason: "span must be at least 2" });
    }
    let base = gen_trace(p)?;
    let mut symbols = base.symbols().clone();
    let x = symbols.var("planted").map_err(|_| GenError::InfeasibleSpan {
        span: target_span,
        reason: "name `planted` is taken",
    })?;
    let n = base.len() + 2;
    if target_span > n {
        return Err(GenError::InfeasibleSpan { span: target_span, reason: "longer than the trace" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37_79b9_7f4a_7c15);
    let threads: Vec<ThreadId> = (0..p.threads as u32).map(ThreadId).collect();
    for _ in 0..256 {
        let i = rng.gen_range(0..=n - target_span);
        let j = i + target_span - 1;
        let (t1, t2) = if threads.len() >= 2 {
            let mut pick = threads.clone();
            pick.shuffle(&mut rng);
            (pick[0], pick[1])
        } else {
            (threads[0], symbols.thread(&format!("T{}", p.threads + 1)))
        };
        let mut events: Vec<Event> = base.events().to_vec();
        events.insert(i, Event::new(0, t1, Op::Write(x)));
        events.insert(j, Event::new(0, t2, Op::Write(x)));
        let tr = Trace::from_parts(events, symbols.clone());
        if !hb_path(&tr, i, j) {
            return Ok((tr, (i as u64, j as u64)));
        }
    }
    Err(GenError::InfeasibleSpan { span: target_span, reason: "every placement is ordered by synchronization" })
}

/// Prepends `n` events of fresh threads on fresh variables and locks. The
/// original events keep their relative order and shift by `n`.
pub fn with_noise_prefix(tr: &Trace, n: usize, seed: u64) -> Trace {
    let mut symbols = tr.symbols().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threads: Vec<ThreadId> = (0..2).map(|k| symbols.thread(&format!("T{}", 9000 + k))).collect();
    let vars: Vec<VarId> = (0..2).map(|k| symbols.var(&format!("noise_v{k}")).expect("fresh")).collect();
    let lock = symbols.lock("noise_l").expect("fresh");
    let mut events = Vec::with_capacity(n + tr.len());
    let mut holder: Option<usize> = None;
    while events.len() < n {
        let remaining = n - events.len();
        let t = rng.gen_range(0..threads.len());
        let op = match holder {
            Some(h) if h == t && (remaining == 1 || rng.gen_bool(0.3)) => {
                holder = None;
                Op::Release(lock)
            }
            Some(h) if remaining == 1 => {
                holder = None;
                events.push(Event::new(0, threads[h], Op::Release(lock)));
                continue;
            }
            None if remaining > 2 && rng.gen_bool(0.15) => {
                holder = Some(t);
                Op::Acquire(lock)
            }
            _ => {
                let x = vars[rng.gen_range(0..vars.len())];
                if rng.gen_bool(0.5) {
                    Op::Read(x)
                } else {
                    Op::Write(x)
                }
            }
        };
        events.push(Event::new(0, threads[t], op));
    }
    events.extend_from_slice(tr.events());
    Trace::from_parts(events, symbols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::conflicting;
    use proptest::prelude::*;

    #[test]
    fn single_thread_has_no_conflicts() {
        let tr = gen_trace(&GenParams { threads: 1, length: 60, seed: 3, ..GenParams::default() }).unwrap();
        let e = tr.events();
        for a in 0..e.len() {
            for b in a + 1..e.len() {
                assert!(!conflicting(&e[a], &e[b]));
            }
        }
    }

    #[test]
    fn seed_replay_is_identical() {
        let p = GenParams { threads: 4, vars: 3, locks: 2, length: 200, lock_density: 0.3, seed: 77, ..GenParams::default() };
        assert_eq!(gen_trace(&p).unwrap().serialize(), gen_trace(&p).unwrap().serialize());
        let q = GenParams { seed: 78, ..p.clone() };
        assert_ne!(gen_trace(&p).unwrap().serialize(), gen_trace(&q).unwrap().serialize());
    }

    #[test]
    fn infeasible_params() {
        let p = GenParams { locks: 0, lock_density: 0.5, ..GenParams::default() };
        assert_eq!(gen_trace(&p).unwrap_err(), GenError::NoLocks(0.5));
        assert_eq!(gen_trace(&GenParams { threads: 0, ..GenParams::default() }).unwrap_err(), GenError::NoThreads);
        assert!(plant_short_race(&GenParams::default(), 1).is_err());
    }

    #[test]
    fn no_locks_means_no_sync() {
        let p = GenParams { locks: 0, lock_density: 0.0, length: 50, ..GenParams::default() };
        let tr = gen_trace(&p).unwrap();
        assert!(tr.events().iter().all(|e| e.op.is_access()));
    }

    #[test]
    fn dangling_acquires_only_when_allowed() {
        for seed in 0..40 {
            let p = GenParams { threads: 3, locks: 2, lock_density: 0.6, cs_mean_len: 50.0, length: 40, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let acq = tr.events().iter().filter(|e| matches!(e.op, Op::Acquire(_))).count();
            let rel = tr.events().iter().filter(|e| matches!(e.op, Op::Release(_))).count();
            assert_eq!(acq, rel, "seed {seed}");
        }
    }

    #[test]
    fn planted_pair_has_requested_span() {
        for span in [2usize, 5, 17] {
            let p = GenParams { threads: 3, vars: 2, locks: 2, length: 60, lock_density: 0.3, seed: span as u64, ..GenParams::default() };
            let (tr, (i, j)) = plant_short_race(&p, span).unwrap();
            assert_eq!((j - i + 1) as usize, span);
            assert!(conflicting(tr.event(i as usize), tr.event(j as usize)));
            assert!(tr.check_well_formed().ok());
        }
    }

    #[test]
    fn noise_prefix_keeps_original_suffix() {
        let tr = gen_trace(&GenParams { length: 30, seed: 5, ..GenParams::default() }).unwrap();
        let noisy = with_noise_prefix(&tr, 50, 1);
        assert_eq!(noisy.len(), 80);
        assert!(noisy.check_well_formed().ok());
        let sym = noisy.symbols();
        for (a, b) in tr.events().iter().zip(&noisy.events()[50..]) {
            assert_eq!(tr.symbols().render(a), sym.render(b));
        }
    }

    proptest! {
        #[test]
        fn generated_traces_are_well_formed(
            threads in 1usize..5, vars in 1usize..5, locks in 1usize..4, length in 0usize..150,
            density in 0.0f64..1.0, cs in 1.0f64..30.0, dangling: bool, seed: u64,
        ) {
            let p = GenParams { threads, vars, locks, length, lock_density: density, cs_mean_len: cs, allow_dangling: dangling, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            prop_assert_eq!(tr.len(), length);
            prop_assert!(tr.check_well_formed().ok());
            // serialization round trip
            let back = Trace::parse(&tr.serialize()).unwrap();
            prop_assert_eq!(back.serialize(), tr.serialize());
        }
    }
}
