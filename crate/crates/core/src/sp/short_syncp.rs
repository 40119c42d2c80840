use std::collections::VecDeque;

use crate::detector::{DetectorStats, RaceDetector};
use crate::report::PairSink;
use crate::sp::tlc::{Annot, Handle, Tlc};
use crate::trace::{Event, LockId, Op, ThreadId, VarId};

/// What happens to a critical section once both its acquire and its release
/// have left the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Retention {
    /// Keep it while some live timestamp still cuts into it. Exact.
    #[default]
    Exact,
    /// Forget it immediately: only window-resident sections and spilled open
    /// sections take part in closure computations. Can miss closure edges.
    WindowOnly,
}

/// How prior accesses are enumerated when an access arrives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScanMode {
    /// Check every stored conflicting access; reports every racy pair.
    #[default]
    AllPairs,
    /// Per (thread, access kind), stop at the newest racy partner. Still
    /// reports every racy variable.
    FirstRacyPerPattern,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpConfig {
    /// Window size in events; `None` keeps the whole trace.
    pub window: Option<usize>,
    pub retention: Retention,
    pub scan: ScanMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Owner {
    /// The acquire is resident.
    Acquire,
    /// The acquire was evicted, the release is resident.
    Release,
    /// The acquire was evicted before its release arrived.
    Open,
    /// Both ends were evicted.
    Unowned,
    Free,
}

#[derive(Clone, Debug)]
struct CsSummary {
    tid: ThreadId,
    lock: LockId,
    acq_idx: u64,
    /// Timestamp of the matching release, once seen.
    rel: Option<Tlc>,
    owner: Owner,
    gen: u32,
    marked: bool,
}

#[derive(Clone, Debug)]
struct AccEntry {
    idx: u64,
    pos: u32,
    /// Timestamp of the thread-order predecessor.
    prev: Tlc,
}

const READ: usize = 0;
const WRITE: usize = 1;

/// Streaming sync-preserving race detector over a sliding window.
///
/// Every timestamp is the TL-closure of an event, stored as per-thread cuts.
/// Each cut also records, per lock, the thread's latest acquire below it and
/// whether the cut sits inside that critical section; the sync-preserving
/// closure is a fixed point over these annotations.
#[derive(Debug)]
pub struct ShortSyncP {
    cfg: SpConfig,
    window: VecDeque<Event>,
    threads: Vec<Tlc>,
    last_write: Vec<Option<Tlc>>,
    /// Indexed by variable, then thread, then access kind.
    acc: Vec<Vec<[VecDeque<AccEntry>; 2]>>,
    /// Indexed by thread, then lock.
    cs: Vec<Vec<VecDeque<Handle>>>,
    open: Vec<Option<Handle>>,
    summaries: Vec<CsSummary>,
    free: Vec<u32>,
    num_locks: usize,
    records: u64,
    peak_records: u64,
    live_clocks: u64,
    peak_live_clocks: u64,
    unowned: u64,
    retained: u64,
    peak_retained: u64,
}

fn grow<T>(v: &mut Vec<T>, i: usize, fill: impl FnMut() -> T) {
    if v.len() <= i {
        v.resize_with(i + 1, fill);
    }
}

impl ShortSyncP {
    /// Exact detector for races of span at most `w`.
    pub fn new(w: usize) -> Self {
        Self::with_config(SpConfig { window: Some(w), ..SpConfig::default() })
    }

    /// Whole-trace detector: every sync-preserving race.
    pub fn unbounded() -> Self {
        Self::with_config(SpConfig::default())
    }

    pub fn with_config(cfg: SpConfig) -> Self {
        if let Some(w) = cfg.window {
            assert!(w >= 1, "window must hold at least one event");
        }
        ShortSyncP {
            cfg,
            window: VecDeque::with_capacity(cfg.window.unwrap_or(0).min(1 << 20)),
            threads: Vec::new(),
            last_write: Vec::new(),
            acc: Vec::new(),
            cs: Vec::new(),
            open: Vec::new(),
            summaries: Vec::new(),
            free: Vec::new(),
            num_locks: 0,
            records: 0,
            peak_records: 0,
            live_clocks: 0,
            peak_live_clocks: 0,
            unowned: 0,
            retained: 0,
            peak_retained: 0,
        }
    }

    pub fn config(&self) -> SpConfig {
        self.cfg
    }

    /// TL-closure of the latest event of `t`.
    pub fn thread_clock(&self, t: ThreadId) -> Tlc {
        self.threads.get(t.index()).cloned().unwrap_or_default()
    }

    /// TL-closure of the latest write to `x`.
    pub fn last_write(&self, x: VarId) -> Option<&Tlc> {
        self.last_write.get(x.index())?.as_ref()
    }

    /// Event-local records currently allocated: stored accesses, critical
    /// sections owned by a resident event and spilled open sections.
    pub fn records(&self) -> u64 {
        self.records
    }

    /// Trace index of the acquire whose section is spilled for `l`, if any.
    pub fn open_acquire(&self, l: LockId) -> Option<u64> {
        let h = (*self.open.get(l.index())?)?;
        Some(self.summaries[h.slot as usize].acq_idx)
    }

    /// Sections kept alive after both ends left the window, as of the last
    /// collection.
    pub fn retained(&self) -> u64 {
        self.retained
    }

    fn ensure(&mut self, e: &Event) {
        let t = e.tid.index();
        grow(&mut self.threads, t, Tlc::default);
        if self.cs.len() <= t {
            let locks = self.num_locks;
            self.cs.resize_with(t + 1, || (0..locks).map(|_| VecDeque::new()).collect());
        }
        match e.op {
            Op::Read(x) | Op::Write(x) => {
                grow(&mut self.last_write, x.index(), || None);
                grow(&mut self.acc, x.index(), Vec::new);
                grow(&mut self.acc[x.index()], t, Default::default);
            }
            Op::Acquire(l) | Op::Release(l) => {
                if l.index() >= self.num_locks {
                    self.num_locks = l.index() + 1;
                    self.open.resize(self.num_locks, None);
                    for row in &mut self.cs {
                        row.resize_with(self.num_locks, VecDeque::new);
                    }
                }
            }
        }
    }

    fn bump_records(&mut self, delta: i64) {
        self.records = self.records.checked_add_signed(delta).expect("record count underflow");
        self.peak_records = self.peak_records.max(self.records);
    }

    fn bump_clocks(&mut self, delta: i64) {
        self.live_clocks = self.live_clocks.checked_add_signed(delta).expect("clock count underflow");
        self.peak_live_clocks = self.peak_live_clocks.max(self.live_clocks);
    }

    fn summary(&self, h: Handle) -> Option<&CsSummary> {
        let s = self.summaries.get(h.slot as usize)?;
        (s.gen == h.gen && s.owner != Owner::Free).then_some(s)
    }

    fn alloc(&mut self, s: CsSummary) -> Handle {
        match self.free.pop() {
            Some(slot) => {
                let gen = self.summaries[slot as usize].gen;
                self.summaries[slot as usize] = CsSummary { gen, ..s };
                Handle { slot, gen }
            }
            None => {
                self.summaries.push(s);
                Handle { slot: self.summaries.len() as u32 - 1, gen: 0 }
            }
        }
    }

    fn release_slot(&mut self, h: Handle) {
        let s = &mut self.summaries[h.slot as usize];
        assert_eq!(s.gen, h.gen, "double free of a critical-section summary");
        if s.rel.take().is_some() {
            self.live_clocks -= 1;
        }
        s.owner = Owner::Free;
        s.gen = s.gen.wrapping_add(1);
        self.free.push(h.slot);
    }

    /// Whether an annotation takes part in closure computations.
    fn visible(&self, a: &Annot) -> bool {
        match self.cfg.retention {
            Retention::Exact => true,
            Retention::WindowOnly => self.summary(a.cs).is_some_and(|s| s.owner != Owner::Unowned),
        }
    }

    /// Whether the pair (e1, e2) is a sync-preserving race, given the
    /// timestamp of e2's predecessor.
    fn is_race(&self, prev2: &Tlc, t1: ThreadId, e1: &AccEntry) -> bool {
        let mut ideal = prev2.clone();
        ideal.join(&e1.prev);
        let mut latest = vec![None::<u64>; self.num_locks];
        let mut pending = Vec::new();
        loop {
            if ideal.contains(t1, e1.pos) {
                return false;
            }
            latest.iter_mut().for_each(|v| *v = None);
            for row in ideal.rows() {
                for (l, a) in row.iter().enumerate() {
                    if let Some(a) = a.filter(|a| self.visible(a)) {
                        latest[l] = latest[l].max(Some(a.acq));
                    }
                }
            }
            pending.clear();
            for row in ideal.rows() {
                for (l, a) in row.iter().enumerate() {
                    if let Some(a) = a.filter(|a| a.inside && self.visible(a)) {
                        if Some(a.acq) < latest[l] {
                            pending.push(a.cs);
                        }
                    }
                }
            }
            let mut grew = false;
            for h in &pending {
                let s = self.summary(*h).expect("closure reached a freed critical section");
                // a later acquire of the same lock is in the ideal, so this
                // section was closed before it
                let rel = s.rel.as_ref().expect("open critical section followed by an acquire");
                grew |= ideal.join(rel);
            }
            if !grew {
                return true;
            }
        }
    }

    fn check(&self, t: ThreadId, x: VarId, is_write: bool, j: u64, prev2: &Tlc, sink: &mut PairSink) {
        let Some(per_thread) = self.acc.get(x.index()) else { return };
        let kinds: &[usize] = if is_write { &[WRITE, READ] } else { &[WRITE] };
        for (u, lists) in per_thread.iter().enumerate() {
            let u = ThreadId(u as u32);
            if u == t {
                continue;
            }
            for &k in kinds {
                for e1 in lists[k].iter().rev() {
                    // older entries of u are in the ideal as well
                    if prev2.contains(u, e1.pos) {
                        break;
                    }
                    if self.is_race(prev2, u, e1) {
                        sink.report(e1.idx, j, x);
                        if self.cfg.scan == ScanMode::FirstRacyPerPattern {
                            break;
                        }
                    }
                }
            }
        }
    }

    fn access(&mut self, e: &Event, x: VarId, kind: usize, sink: &mut PairSink) {
        let t = e.tid;
        let prev = self.threads[t.index()].clone();
        self.check(t, x, kind == WRITE, e.idx, &prev, sink);
        let pos = prev.cut(t);
        let cur = &mut self.threads[t.index()];
        cur.advance(t, None);
        if kind == READ {
            if let Some(lw) = &self.last_write[x.index()] {
                cur.join(lw);
            }
        } else {
            if self.last_write[x.index()].is_none() {
                self.bump_clocks(1);
            }
            self.last_write[x.index()] = Some(self.threads[t.index()].clone());
        }
        self.acc[x.index()][t.index()][kind].push_back(AccEntry { idx: e.idx, pos, prev });
        self.bump_clocks(1);
        self.bump_records(1);
    }

    fn acquire(&mut self, e: &Event, l: LockId) {
        let t = e.tid;
        let h = self.alloc(CsSummary {
            tid: t,
            lock: l,
            acq_idx: e.idx,
            rel: None,
            owner: Owner::Acquire,
            gen: 0,
            marked: false,
        });
        let cur = &mut self.threads[t.index()];
        let row = cur.row_with(t, l, Annot { acq: e.idx, cs: h, inside: true });
        cur.advance(t, Some(row));
        self.cs[t.index()][l.index()].push_back(h);
        self.bump_records(1);
    }

    fn release(&mut self, e: &Event, l: LockId) {
        let t = e.tid;
        if let Some(h) = self.open[l.index()] {
            if self.summaries[h.slot as usize].tid == t {
                self.replay(t, l, h);
            }
        }
        let h = *self.cs[t.index()][l.index()].back().expect("release without a recorded acquire");
        let cur = &mut self.threads[t.index()];
        let a = cur.annot(t, l).expect("release without an annotated acquire");
        debug_assert_eq!(a.cs, h);
        let row = cur.row_with(t, l, Annot { inside: false, ..a });
        cur.advance(t, Some(row));
        let rel = cur.clone();
        let s = &mut self.summaries[h.slot as usize];
        debug_assert!(s.rel.is_none());
        s.rel = Some(rel);
        self.bump_clocks(1);
    }

    /// Puts a spilled open section back under the ownership of its release.
    fn replay(&mut self, t: ThreadId, l: LockId, h: Handle) {
        let list = &mut self.cs[t.index()][l.index()];
        assert!(list.is_empty(), "replay with a resident section of the same thread and lock");
        list.push_back(h);
        self.open[l.index()] = None;
        self.summaries[h.slot as usize].owner = Owner::Release;
    }

    /// Reclaims the records owned by an evicted event.
    fn collect(&mut self, out: &Event) {
        let t = out.tid.index();
        match out.op {
            Op::Read(x) | Op::Write(x) => {
                let kind = if matches!(out.op, Op::Read(_)) { READ } else { WRITE };
                let e = self.acc[x.index()][t][kind].pop_front().expect("evicted access has no record");
                assert_eq!(e.idx, out.idx, "access records out of order");
                self.bump_records(-1);
                self.bump_clocks(-1);
            }
            Op::Acquire(l) => {
                let list = &mut self.cs[t][l.index()];
                let h = *list.front().expect("evicted acquire has no record");
                let s = &mut self.summaries[h.slot as usize];
                assert_eq!(s.acq_idx, out.idx, "critical sections out of order");
                if s.rel.is_some() {
                    s.owner = Owner::Release;
                } else {
                    // still open: spill
                    s.owner = Owner::Open;
                    list.pop_front();
                    assert!(self.open[l.index()].is_none(), "two open critical sections on one lock");
                    self.open[l.index()] = Some(h);
                }
            }
            Op::Release(l) => {
                let h = self.cs[t][l.index()].pop_front().expect("evicted release has no record");
                self.bump_records(-1);
                match self.cfg.retention {
                    Retention::WindowOnly => self.release_slot(h),
                    Retention::Exact => {
                        self.summaries[h.slot as usize].owner = Owner::Unowned;
                        self.unowned += 1;
                        self.maybe_gc();
                    }
                }
            }
        }
    }

    fn gc_threshold(&self) -> u64 {
        let roots = (self.window.len() + self.last_write.len() + self.threads.len()) as u64;
        256u64.max(2 * self.retained).max(roots)
    }

    fn maybe_gc(&mut self) {
        if self.unowned >= self.gc_threshold() {
            self.gc();
        }
    }

    /// Frees the summaries of evicted sections that no live timestamp cuts
    /// into any more.
    pub fn gc(&mut self) {
        fn inside(tlc: &Tlc, out: &mut Vec<Handle>) {
            for row in tlc.rows() {
                out.extend(row.iter().flatten().filter(|a| a.inside).map(|a| a.cs));
            }
        }
        let mut stack = Vec::new();
        for s in &mut self.summaries {
            s.marked = false;
        }
        for c in &self.threads {
            inside(c, &mut stack);
        }
        for c in self.last_write.iter().flatten() {
            inside(c, &mut stack);
        }
        for lists in self.acc.iter().flatten() {
            for e in lists.iter().flatten() {
                inside(&e.prev, &mut stack);
            }
        }
        for s in &self.summaries {
            if matches!(s.owner, Owner::Acquire | Owner::Release | Owner::Open) {
                if let Some(rel) = &s.rel {
                    inside(rel, &mut stack);
                }
            }
        }
        while let Some(h) = stack.pop() {
            let s = &mut self.summaries[h.slot as usize];
            assert_eq!(s.gen, h.gen, "live timestamp refers to a freed critical section");
            if s.owner == Owner::Unowned && !s.marked {
                s.marked = true;
                if let Some(rel) = &s.rel {
                    inside(rel, &mut stack);
                }
            }
        }
        let dead: Vec<Handle> = self
            .summaries
            .iter()
            .enumerate()
            .filter(|(_, s)| s.owner == Owner::Unowned && !s.marked)
            .map(|(i, s)| Handle { slot: i as u32, gen: s.gen })
            .collect();
        for h in dead {
            self.release_slot(h);
        }
        self.unowned = self.summaries.iter().filter(|s| s.owner == Owner::Unowned).count() as u64;
        self.retained = self.unowned;
        self.peak_retained = self.peak_retained.max(self.retained);
    }

    pub fn activate(&mut self, e: &Event, sink: &mut PairSink) {
        self.ensure(e);
        if let Some(cap) = self.cfg.window {
            if self.window.len() == cap {
                let out = self.window.pop_front().expect("full window is non-empty");
                self.collect(&out);
            }
        }
        match e.op {
            Op::Read(x) => self.access(e, x, READ, sink),
            Op::Write(x) => self.access(e, x, WRITE, sink),
            Op::Acquire(l) => self.acquire(e, l),
            Op::Release(l) => self.release(e, l),
        }
        self.window.push_back(*e);
    }

    fn resident(&self, idx: u64) -> bool {
        self.window.front().is_some_and(|f| f.idx <= idx) && self.window.back().is_some_and(|b| idx <= b.idx)
    }
}

impl RaceDetector for ShortSyncP {
    fn process(&mut self, e: &Event, sink: &mut PairSink) {
        self.activate(e, sink);
    }

    fn stats(&self) -> DetectorStats {
        DetectorStats {
            records: self.records,
            peak_records: self.peak_records,
            peak_live_clocks: self.peak_live_clocks,
            peak_retained: self.peak_retained,
        }
    }

    fn check_invariants(&self) -> Result<(), String> {
        if let Some(cap) = self.cfg.window {
            if self.window.len() > cap {
                return Err(format!("window holds {} events, capacity {cap}", self.window.len()));
            }
            let bound = (cap + self.num_locks) as u64;
            if self.records > bound {
                return Err(format!("{} records exceed w + L = {bound}", self.records));
            }
        }
        let mut counted = 0u64;
        for (x, per_thread) in self.acc.iter().enumerate() {
            for (t, lists) in per_thread.iter().enumerate() {
                for list in lists {
                    counted += list.len() as u64;
                    if list.iter().zip(list.iter().skip(1)).any(|(a, b)| a.idx >= b.idx) {
                        return Err(format!("access list of x{x}, thread {t} is not sorted"));
                    }
                    if let Some(e) = list.iter().find(|e| !self.resident(e.idx)) {
                        return Err(format!("access record for evicted event {}", e.idx));
                    }
                }
            }
        }
        for (t, row) in self.cs.iter().enumerate() {
            for (l, list) in row.iter().enumerate() {
                counted += list.len() as u64;
                let mut last = None;
                for h in list {
                    let s = self.summary(*h).ok_or_else(|| format!("stale section handle for T{t}, l{l}"))?;
                    if s.tid.index() != t || s.lock.index() != l {
                        return Err(format!("section of thread {} filed under thread {t}", s.tid.0));
                    }
                    if last.is_some_and(|p| p >= s.acq_idx) {
                        return Err(format!("sections of thread {t} on lock {l} are not sorted"));
                    }
                    last = Some(s.acq_idx);
                    match s.owner {
                        Owner::Acquire if self.resident(s.acq_idx) => {}
                        Owner::Release if s.rel.is_some() => {}
                        o => return Err(format!("section acquired at {} has owner {o:?}", s.acq_idx)),
                    }
                }
            }
        }
        for (l, h) in self.open.iter().enumerate() {
            if let Some(h) = h {
                counted += 1;
                let s = self.summary(*h).ok_or_else(|| format!("stale open handle for lock {l}"))?;
                if s.owner != Owner::Open || s.rel.is_some() || s.lock.index() != l {
                    return Err(format!("open entry for lock {l} is not an open spilled section"));
                }
                if self.resident(s.acq_idx) {
                    return Err(format!("open entry for lock {l} has a resident acquire"));
                }
            }
        }
        if counted != self.records {
            return Err(format!("record counter {} but {counted} records stored", self.records));
        }
        for (t, c) in self.threads.iter().enumerate() {
            for (u, &cut) in c.cuts().iter().enumerate() {
                let own = self.threads.get(u).map_or(0, |cu| cu.cut(ThreadId(u as u32)));
                if cut > own {
                    return Err(format!("timestamp of thread {t} includes future events of thread {u}"));
                }
            }
        }
        if self.cfg.retention == Retention::Exact {
            for c in &self.threads {
                for row in c.rows() {
                    for a in row.iter().flatten().filter(|a| a.inside) {
                        if self.summary(a.cs).is_none() {
                            return Err(format!("thread timestamp cuts into freed section {}", a.acq));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
