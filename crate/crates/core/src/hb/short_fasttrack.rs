use std::collections::HashSet;

use crate::clocks::{ClockWord, Epoch, VectorTimestamp, WindowOrderCtx};
use crate::detector::{DetectorStats, RaceDetector};
use crate::report::PairSink;
use crate::trace::{Event, LockId, Op, ThreadId, VarId};

/// A clock that may hold a window index: a thread clock or a lock clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockRef {
    Thread(u32),
    Lock(u32),
}

/// HB detector restricted to pairs of span at most `w`.
///
/// Clock components hold the window slot of a resident release (or `-1`),
/// compared with the window order of the current head. `refs[i]` lists the
/// clocks whose component for the thread of `W[i]` currently holds `i`, so
/// evicting a release touches exactly those clocks.
#[derive(Clone, Debug)]
pub struct ShortFastTrack<C: ClockWord> {
    cap: usize,
    head: usize,
    started: bool,
    window: Vec<Option<Event>>,
    threads: Vec<VectorTimestamp<C>>,
    locks: Vec<Option<VectorTimestamp<C>>>,
    reads: Vec<Option<VectorTimestamp<C>>>,
    read_count: Vec<u32>,
    writes: Vec<Option<Epoch<C>>>,
    refs: Vec<HashSet<ClockRef>>,
    live_locks: u64,
    live_reads: u64,
    live_writes: u64,
    peak_records: u64,
    peak_live_clocks: u64,
}

const NONE: i64 = -1;

impl<C: ClockWord> ShortFastTrack<C> {
    /// # Panics
    /// If `w < 2` or `w - 1` does not fit in `C`.
    pub fn new(w: usize) -> Self {
        assert!(w >= 2, "window must hold at least two events");
        assert!((w as i64 - 1) <= C::MAX, "window {w} does not fit the clock width");
        ShortFastTrack {
            cap: w,
            head: 0,
            started: false,
            window: vec![None; w],
            threads: Vec::new(),
            locks: Vec::new(),
            reads: Vec::new(),
            read_count: Vec::new(),
            writes: Vec::new(),
            refs: vec![HashSet::new(); w],
            live_locks: 0,
            live_reads: 0,
            live_writes: 0,
            peak_records: 0,
            peak_live_clocks: 0,
        }
    }

    pub fn window_size(&self) -> usize {
        self.cap
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn ctx(&self) -> WindowOrderCtx {
        WindowOrderCtx::new(self.head, self.cap).expect("head is within the window")
    }

    pub fn resident(&self, slot: usize) -> Option<&Event> {
        self.window[slot].as_ref()
    }

    pub fn thread_clock(&self, t: ThreadId) -> VectorTimestamp<C> {
        self.threads.get(t.index()).cloned().unwrap_or_default()
    }

    pub fn lock_clock(&self, l: LockId) -> Option<&VectorTimestamp<C>> {
        self.locks.get(l.index()).and_then(Option::as_ref)
    }

    pub fn read_clock(&self, x: VarId) -> Option<&VectorTimestamp<C>> {
        self.reads.get(x.index()).and_then(Option::as_ref)
    }

    pub fn write_epoch(&self, x: VarId) -> Option<Epoch<C>> {
        self.writes.get(x.index()).copied().flatten()
    }

    pub fn refs(&self, slot: usize) -> &HashSet<ClockRef> {
        &self.refs[slot]
    }

    /// Variable and lock clocks currently allocated; each belongs to a
    /// distinct resident event.
    pub fn records(&self) -> u64 {
        self.live_locks + self.live_reads + self.live_writes
    }

    /// Processes `e`; the evicted event (if any) is collected first.
    pub fn activate(&mut self, e: &Event, sink: &mut PairSink) {
        self.head = if self.started { (self.head + 1) % self.cap } else { 0 };
        self.started = true;
        if let Some(out) = self.window[self.head].take() {
            self.collect(&out);
        }
        self.ensure(e);
        match e.op {
            Op::Read(x) => self.read(e.tid, x, e.idx, sink),
            Op::Write(x) => self.write(e.tid, x, e.idx, sink),
            Op::Acquire(l) => self.acquire(e.tid, l),
            Op::Release(l) => self.release(e.tid, l),
        }
        self.window[self.head] = Some(*e);
        self.peak_records = self.peak_records.max(self.records());
        self.peak_live_clocks = self.peak_live_clocks.max(self.threads.len() as u64 + self.records());
    }

    fn ensure(&mut self, e: &Event) {
        if self.threads.len() <= e.tid.index() {
            self.threads.resize(e.tid.index() + 1, VectorTimestamp::default());
        }
        match e.op {
            Op::Read(x) | Op::Write(x) if self.reads.len() <= x.index() => {
                self.reads.resize(x.index() + 1, None);
                self.read_count.resize(x.index() + 1, 0);
                self.writes.resize(x.index() + 1, None);
            }
            Op::Acquire(l) | Op::Release(l) if self.locks.len() <= l.index() => {
                self.locks.resize(l.index() + 1, None);
            }
            _ => {}
        }
    }

    fn idx_of(&self, slot: i64) -> u64 {
        self.window[slot as usize].expect("clock entry refers to a resident event").idx
    }

    fn read(&mut self, t: ThreadId, x: VarId, j: u64, sink: &mut PairSink) {
        let ctx = self.ctx();
        let ct = &self.threads[t.index()];
        if let Some(ep) = self.writes[x.index()] {
            // own accesses are ordered by the thread
            if ep.tid != t && !ctx.leq_unchecked(ep.clock.to_i64(), ct.get(ep.tid).to_i64()) {
                sink.report(self.idx_of(ep.clock.to_i64()), j, x);
            }
        }
        let h = C::from_i64(self.head as i64);
        let rd = &mut self.reads[x.index()];
        if rd.is_none() {
            *rd = Some(VectorTimestamp::default());
            self.live_reads += 1;
        }
        rd.as_mut().expect("just allocated").set(t, h);
        self.read_count[x.index()] += 1;
    }

    fn write(&mut self, t: ThreadId, x: VarId, j: u64, sink: &mut PairSink) {
        let ctx = self.ctx();
        let ct = &self.threads[t.index()];
        if let Some(rd) = &self.reads[x.index()] {
            for (u, c) in rd.iter() {
                let c = c.to_i64();
                if u != t && c != NONE && !ctx.leq_unchecked(c, ct.get(u).to_i64()) {
                    sink.report(self.idx_of(c), j, x);
                }
            }
        }
        if let Some(ep) = self.writes[x.index()] {
            if ep.tid != t && !ctx.leq_unchecked(ep.clock.to_i64(), ct.get(ep.tid).to_i64()) {
                sink.report(self.idx_of(ep.clock.to_i64()), j, x);
            }
        }
        if self.writes[x.index()].is_none() {
            self.live_writes += 1;
        }
        self.writes[x.index()] = Some(Epoch::new(t, C::from_i64(self.head as i64)));
    }

    fn unref(&mut self, slot: C, who: ClockRef) {
        let s = slot.to_i64();
        if s != NONE {
            self.refs[s as usize].remove(&who);
        }
    }

    fn drop_lock_clock(&mut self, l: LockId) {
        if let Some(cl) = self.locks[l.index()].take() {
            for (_, c) in cl.iter() {
                self.unref(c, ClockRef::Lock(l.0));
            }
            self.live_locks -= 1;
        }
    }

    fn acquire(&mut self, t: ThreadId, l: LockId) {
        let ctx = self.ctx();
        let Some(cl) = self.locks[l.index()].clone() else {
            return;
        };
        for (u, lc) in cl.iter() {
            let cur = self.threads[t.index()].get(u);
            if ctx.lt_unchecked(cur.to_i64(), lc.to_i64()) {
                self.refs[lc.to_i64() as usize].insert(ClockRef::Thread(t.0));
                self.unref(cur, ClockRef::Thread(t.0));
                self.threads[t.index()].set(u, lc);
            }
        }
        // the next acquire of l follows a release that rebuilds the clock
        self.drop_lock_clock(l);
    }

    fn release(&mut self, t: ThreadId, l: LockId) {
        let h = self.head;
        let own = self.threads[t.index()].get(t);
        self.unref(own, ClockRef::Thread(t.0));
        debug_assert!(self.refs[h].is_empty(), "slot {h} still referenced after collection");
        self.refs[h].clear();
        self.refs[h].insert(ClockRef::Thread(t.0));
        self.threads[t.index()].set(t, C::from_i64(h as i64));
        self.drop_lock_clock(l);
        let ct = self.threads[t.index()].clone();
        for (_, c) in ct.iter() {
            let s = c.to_i64();
            if s != NONE {
                self.refs[s as usize].insert(ClockRef::Lock(l.0));
            }
        }
        self.locks[l.index()] = Some(ct);
        self.live_locks += 1;
    }

    fn collect(&mut self, out: &Event) {
        let h = self.head as i64;
        match out.op {
            Op::Read(x) => {
                let rd = self.reads[x.index()].as_mut().expect("read clock exists while a read is resident");
                if rd.get(out.tid).to_i64() == h {
                    rd.set(out.tid, C::BOTTOM);
                }
                self.read_count[x.index()] -= 1;
                if self.read_count[x.index()] == 0 {
                    self.reads[x.index()] = None;
                    self.live_reads -= 1;
                }
            }
            Op::Write(x) => {
                if self.writes[x.index()] == Some(Epoch::new(out.tid, C::from_i64(h))) {
                    self.writes[x.index()] = None;
                    self.live_writes -= 1;
                }
            }
            Op::Release(_) => {
                let t = out.tid;
                let members = std::mem::take(&mut self.refs[self.head]);
                for r in members {
                    match r {
                        ClockRef::Thread(u) => {
                            let c = &mut self.threads[u as usize];
                            assert_eq!(c.get(t).to_i64(), h, "refs[{h}] lists a thread clock that moved on");
                            c.set(t, C::BOTTOM);
                        }
                        ClockRef::Lock(l) => {
                            let slot = &mut self.locks[l as usize];
                            let c = slot.as_mut().expect("refs lists only live lock clocks");
                            assert_eq!(c.get(t).to_i64(), h, "refs[{h}] lists a lock clock that moved on");
                            c.set(t, C::BOTTOM);
                            if c.is_bottom() {
                                *slot = None;
                                self.live_locks -= 1;
                            }
                        }
                    }
                }
            }
            Op::Acquire(_) => {}
        }
    }

    fn check_clock(&self, who: ClockRef, c: &VectorTimestamp<C>) -> Result<(), String> {
        for (u, v) in c.iter() {
            let v = v.to_i64();
            if v == NONE {
                continue;
            }
            if v < 0 || v >= self.cap as i64 {
                return Err(format!("{who:?}[{}] = {v} is outside the window", u.0));
            }
            match self.window[v as usize] {
                Some(Event { tid, op: Op::Release(_), .. }) if tid == u => {}
                other => return Err(format!("{who:?}[{}] = {v} but slot holds {other:?}", u.0)),
            }
            if !self.refs[v as usize].contains(&who) {
                return Err(format!("{who:?}[{}] = {v} is missing from refs[{v}]", u.0));
            }
        }
        Ok(())
    }
}

impl<C: ClockWord> RaceDetector for ShortFastTrack<C> {
    fn process(&mut self, e: &Event, sink: &mut PairSink) {
        self.activate(e, sink);
    }

    fn stats(&self) -> DetectorStats {
        DetectorStats {
            records: self.records(),
            peak_records: self.peak_records,
            peak_live_clocks: self.peak_live_clocks,
            peak_retained: 0,
        }
    }

    fn check_invariants(&self) -> Result<(), String> {
        for (t, c) in self.threads.iter().enumerate() {
            self.check_clock(ClockRef::Thread(t as u32), c)?;
        }
        let mut live_locks = 0;
        for (l, c) in self.locks.iter().enumerate() {
            if let Some(c) = c {
                live_locks += 1;
                if c.is_bottom() {
                    return Err(format!("lock clock {l} is live but empty"));
                }
                self.check_clock(ClockRef::Lock(l as u32), c)?;
            }
        }
        for (i, members) in self.refs.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let Some(Event { tid, op: Op::Release(_), .. }) = self.window[i] else {
                return Err(format!("refs[{i}] is non-empty but slot {i} holds no release"));
            };
            for m in members {
                let c = match *m {
                    ClockRef::Thread(u) => self.threads.get(u as usize),
                    ClockRef::Lock(l) => self.locks.get(l as usize).and_then(Option::as_ref),
                };
                if c.map(|c| c.get(tid).to_i64()) != Some(i as i64) {
                    return Err(format!("refs[{i}] lists {m:?} whose entry is not {i}"));
                }
            }
        }
        let mut counts = vec![0u32; self.reads.len()];
        for e in self.window.iter().flatten() {
            if let Op::Read(x) = e.op {
                counts[x.index()] += 1;
            }
        }
        let mut live_reads = 0;
        for (x, rd) in self.reads.iter().enumerate() {
            if counts[x] != self.read_count[x] {
                return Err(format!("read counter of variable {x} is {} but {} reads are resident", self.read_count[x], counts[x]));
            }
            if rd.is_some() != (counts[x] > 0) {
                return Err(format!("read clock of variable {x} is allocated iff a read is resident"));
            }
            if let Some(rd) = rd {
                live_reads += 1;
                for (u, v) in rd.iter() {
                    let v = v.to_i64();
                    if v == NONE {
                        continue;
                    }
                    match self.window.get(v as usize).copied().flatten() {
                        Some(Event { tid, op: Op::Read(y), .. }) if tid == u && y.index() == x => {}
                        other => return Err(format!("read clock {x}[{}] = {v} but slot holds {other:?}", u.0)),
                    }
                }
            }
        }
        let mut live_writes = 0;
        for (x, ep) in self.writes.iter().enumerate() {
            if let Some(ep) = ep {
                live_writes += 1;
                match self.window.get(ep.clock.to_i64() as usize).copied().flatten() {
                    Some(Event { tid, op: Op::Write(y), .. }) if tid == ep.tid && y.index() == x => {}
                    other => return Err(format!("write epoch of {x} points at {other:?}")),
                }
            }
        }
        if (live_locks, live_reads, live_writes) != (self.live_locks, self.live_reads, self.live_writes) {
            return Err("live clock counters disagree with the state".into());
        }
        if self.records() > self.cap as u64 {
            return Err(format!("{} records exceed the window size {}", self.records(), self.cap));
        }
        let total_refs: usize = self.refs.iter().map(HashSet::len).sum();
        let bound = (self.threads.len() + live_locks as usize) * self.threads.len();
        if total_refs > bound {
            return Err(format!("{total_refs} slot references exceed (T + live locks) * T = {bound}"));
        }
        Ok(())
    }
}
