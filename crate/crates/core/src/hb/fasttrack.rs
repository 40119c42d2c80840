use crate::clocks::{epoch_leq, ClockWord, Epoch, VectorTimestamp};
use crate::detector::{DetectorStats, RaceDetector};
use crate::report::PairSink;
use crate::trace::{Event, LockId, Op, ThreadId, VarId};

/// Vector-clock HB detector over whole traces. Clock values are local times
/// (the number of earlier events of the same thread), `-1` meaning none; the
/// local clock advances at every event.
#[derive(Clone, Debug, Default)]
pub struct FastTrack<C: ClockWord> {
    threads: Vec<VectorTimestamp<C>>,
    locks: Vec<VectorTimestamp<C>>,
    reads: Vec<VectorTimestamp<C>>,
    /// Trace index of each thread's last read of each variable.
    read_idx: Vec<Vec<u64>>,
    writes: Vec<Option<(Epoch<C>, u64)>>,
}

fn grow<T: Clone>(v: &mut Vec<T>, i: usize, fill: T) {
    if v.len() <= i {
        v.resize(i + 1, fill);
    }
}

impl<C: ClockWord> FastTrack<C> {
    pub fn new() -> Self {
        FastTrack { threads: Vec::new(), locks: Vec::new(), reads: Vec::new(), read_idx: Vec::new(), writes: Vec::new() }
    }

    /// `C_t` of a thread.
    pub fn thread_clock(&self, t: ThreadId) -> VectorTimestamp<C> {
        self.threads.get(t.index()).cloned().unwrap_or_default()
    }

    fn tick(&mut self, t: ThreadId) {
        grow(&mut self.threads, t.index(), VectorTimestamp::default());
        let c = &mut self.threads[t.index()];
        let next = C::from_i64(c.get(t).to_i64() + 1);
        c.set(t, next);
    }

    fn read(&mut self, t: ThreadId, x: VarId, j: u64, sink: &mut PairSink) {
        let ct = &self.threads[t.index()];
        grow(&mut self.writes, x.index(), None);
        if let Some((ep, i)) = self.writes[x.index()] {
            if !epoch_leq(Some(ep), ct) {
                sink.report(i, j, x);
            }
        }
        grow(&mut self.reads, x.index(), VectorTimestamp::default());
        grow(&mut self.read_idx, x.index(), Vec::new());
        self.reads[x.index()].set(t, ct.get(t));
        let idx = &mut self.read_idx[x.index()];
        grow(idx, t.index(), 0);
        idx[t.index()] = j;
    }

    fn write(&mut self, t: ThreadId, x: VarId, j: u64, sink: &mut PairSink) {
        let ct = &self.threads[t.index()];
        if let Some(rd) = self.reads.get(x.index()) {
            for (u, c) in rd.iter() {
                if c > ct.get(u) {
                    sink.report(self.read_idx[x.index()][u.index()], j, x);
                }
            }
        }
        grow(&mut self.writes, x.index(), None);
        if let Some((ep, i)) = self.writes[x.index()] {
            if !epoch_leq(Some(ep), ct) {
                sink.report(i, j, x);
            }
        }
        self.writes[x.index()] = Some((Epoch::new(t, ct.get(t)), j));
    }

    fn acquire(&mut self, t: ThreadId, l: LockId) {
        if let Some(cl) = self.locks.get(l.index()) {
            self.threads[t.index()].join_assign(cl);
        }
    }

    fn release(&mut self, t: ThreadId, l: LockId) {
        grow(&mut self.locks, l.index(), VectorTimestamp::default());
        self.locks[l.index()] = self.threads[t.index()].clone();
    }
}

impl<C: ClockWord> RaceDetector for FastTrack<C> {
    fn process(&mut self, e: &Event, sink: &mut PairSink) {
        self.tick(e.tid);
        match e.op {
            Op::Read(x) => self.read(e.tid, x, e.idx, sink),
            Op::Write(x) => self.write(e.tid, x, e.idx, sink),
            Op::Acquire(l) => self.acquire(e.tid, l),
            Op::Release(l) => self.release(e.tid, l),
        }
    }

    fn stats(&self) -> DetectorStats {
        let clocks = (self.threads.len() + self.locks.len() + self.reads.len()) as u64;
        DetectorStats { records: 0, peak_records: 0, peak_live_clocks: clocks, peak_retained: 0 }
    }

    fn check_invariants(&self) -> Result<(), String> {
        for (t, c) in self.threads.iter().enumerate() {
            let own = c.get(ThreadId(t as u32)).to_i64();
            for (u, v) in c.iter() {
                let theirs = self.threads.get(u.index()).map(|cu| cu.get(u).to_i64()).unwrap_or(-1);
                if v.to_i64() > theirs {
                    return Err(format!("C_T{t} knows a future of thread {}", u.0));
                }
            }
            if own < -1 {
                return Err(format!("negative local time for thread {t}"));
            }
        }
        Ok(())
    }
}
