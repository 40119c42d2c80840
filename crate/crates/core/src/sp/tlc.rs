//! Timestamps of TL-closed sets, annotated with the lock context of each cut.

use std::rc::Rc;

use crate::trace::{LockId, ThreadId};

/// Reference to a critical-section summary in the engine's arena. The
/// generation guards against reuse of a freed slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Handle {
    pub slot: u32,
    pub gen: u32,
}

/// For one (thread, lock): the latest acquire of the lock by the thread
/// below the cut, and whether the cut falls inside its critical section.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Annot {
    pub acq: u64,
    pub cs: Handle,
    pub inside: bool,
}

/// Annotations of one thread's cut, indexed by lock. Rows are immutable and
/// shared: the row of thread `t` is a function of the cut on `t` alone.
pub type Row = Rc<[Option<Annot>]>;

/// A thread-order downward-closed set of events, stored as the number of
/// events it contains from each thread, plus one lock row per thread.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tlc {
    cut: Vec<u32>,
    rows: Vec<Option<Row>>,
}

impl Tlc {
    pub fn cut(&self, t: ThreadId) -> u32 {
        self.cut.get(t.index()).copied().unwrap_or(0)
    }

    pub fn cuts(&self) -> &[u32] {
        &self.cut
    }

    /// Whether the event at local position `pos` of thread `t` is a member.
    pub fn contains(&self, t: ThreadId, pos: u32) -> bool {
        self.cut(t) > pos
    }

    pub fn annot(&self, t: ThreadId, l: LockId) -> Option<Annot> {
        self.rows.get(t.index())?.as_ref()?.get(l.index()).copied().flatten()
    }

    pub fn threads(&self) -> usize {
        self.cut.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().flatten()
    }

    fn grow(&mut self, t: ThreadId) {
        if self.cut.len() <= t.index() {
            self.cut.resize(t.index() + 1, 0);
            self.rows.resize(t.index() + 1, None);
        }
    }

    /// Adds the next event of `t`; its lock row is replaced by `row` if given.
    pub fn advance(&mut self, t: ThreadId, row: Option<Row>) {
        self.grow(t);
        self.cut[t.index()] += 1;
        if row.is_some() {
            self.rows[t.index()] = row;
        }
    }

    /// Row of `t` with the annotation of `l` replaced.
    pub fn row_with(&self, t: ThreadId, l: LockId, a: Annot) -> Row {
        let cur = self.rows.get(t.index()).and_then(Option::as_ref);
        let len = cur.map_or(0, |r| r.len()).max(l.index() + 1);
        let mut v: Vec<Option<Annot>> = Vec::with_capacity(len);
        if let Some(r) = cur {
            v.extend_from_slice(r);
        }
        v.resize(len, None);
        v[l.index()] = Some(a);
        v.into()
    }

    /// Union of the two sets. Returns whether `self` grew.
    pub fn join(&mut self, other: &Tlc) -> bool {
        if other.cut.len() > self.cut.len() {
            self.cut.resize(other.cut.len(), 0);
            self.rows.resize(other.cut.len(), None);
        }
        let mut grew = false;
        for (t, &c) in other.cut.iter().enumerate() {
            if c > self.cut[t] {
                self.cut[t] = c;
                self.rows[t] = other.rows[t].clone();
                grew = true;
            }
        }
        grew
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(slot: u32) -> Handle {
        Handle { slot, gen: 0 }
    }

    #[test]
    fn join_takes_rows_with_larger_cuts() {
        let t0 = ThreadId(0);
        let t1 = ThreadId(1);
        let l = LockId(0);
        let mut a = Tlc::default();
        a.advance(t0, None);
        let row = a.row_with(t0, l, Annot { acq: 1, cs: h(0), inside: true });
        a.advance(t0, Some(row));
        let mut b = Tlc::default();
        b.advance(t1, None);
        assert!(b.join(&a));
        assert_eq!(b.cuts(), &[2, 1]);
        assert_eq!(b.annot(t0, l).unwrap().acq, 1);
        assert!(!b.join(&a));
        assert!(b.contains(t0, 1) && !b.contains(t0, 2));
        assert_eq!(b.annot(t1, l), None);
    }
}
