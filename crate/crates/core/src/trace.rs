//! Trace model: events, interning, the line grammar, well-formedness and the
//! derived functions (`lw`, `match`, `prev`, span, conflict) that the detectors
//! and oracles share.
//!
//! One event per line:
//!
//! ```text
//! T1|acq(l)
//! T1|w(x)
//! T2|r(x)      # comments and blank lines are ignored
//! ```

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockId(pub u32);

impl ThreadId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LockId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Operation of an event. Variables and locks live in separate namespaces,
/// selected by the operation kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read(VarId),
    Write(VarId),
    Acquire(LockId),
    Release(LockId),
}

impl Op {
    pub fn var(self) -> Option<VarId> {
        match self {
            Op::Read(x) | Op::Write(x) => Some(x),
            _ => None,
        }
    }

    pub fn lock(self) -> Option<LockId> {
        match self {
            Op::Acquire(l) | Op::Release(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_access(self) -> bool {
        matches!(self, Op::Read(_) | Op::Write(_))
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Op::Read(_) => "r",
            Op::Write(_) => "w",
            Op::Acquire(_) => "acq",
            Op::Release(_) => "rel",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Zero-based position in the trace.
    pub idx: u64,
    pub tid: ThreadId,
    pub op: Op,
}

impl Event {
    pub fn new(idx: u64, tid: ThreadId, op: Op) -> Self {
        Event { idx, tid, op }
    }
}

/// Two accesses to the same variable from different threads, at least one a write.
pub fn conflicting(e1: &Event, e2: &Event) -> bool {
    if e1.tid == e2.tid {
        return false;
    }
    match (e1.op, e2.op) {
        (Op::Write(x), Op::Write(y)) | (Op::Write(x), Op::Read(y)) | (Op::Read(x), Op::Write(y)) => {
            x == y
        }
        _ => false,
    }
}

/// Length of the inclusive subtrace from `i` to `j`.
pub fn span(i: u64, j: u64) -> u64 {
    assert!(i <= j, "span({i}, {j}) requires i <= j");
    j - i + 1
}

/// Dense renumbering of thread, variable and lock names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    threads: Vec<String>,
    vars: Vec<String>,
    locks: Vec<String>,
    thread_ids: HashMap<String, ThreadId>,
    var_ids: HashMap<String, VarId>,
    lock_ids: HashMap<String, LockId>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn thread(&mut self, name: &str) -> ThreadId {
        if let Some(&id) = self.thread_ids.get(name) {
            return id;
        }
        let id = ThreadId(self.threads.len() as u32);
        self.threads.push(name.to_owned());
        self.thread_ids.insert(name.to_owned(), id);
        id
    }

    /// Interns a variable name; fails if the name is already a lock.
    pub fn var(&mut self, name: &str) -> Result<VarId, NamespaceClash> {
        if let Some(&id) = self.var_ids.get(name) {
            return Ok(id);
        }
        if self.lock_ids.contains_key(name) {
            return Err(NamespaceClash(name.to_owned()));
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(name.to_owned());
        self.var_ids.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn lock(&mut self, name: &str) -> Result<LockId, NamespaceClash> {
        if let Some(&id) = self.lock_ids.get(name) {
            return Ok(id);
        }
        if self.var_ids.contains_key(name) {
            return Err(NamespaceClash(name.to_owned()));
        }
        let id = LockId(self.locks.len() as u32);
        self.locks.push(name.to_owned());
        self.lock_ids.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        &self.threads[t.index()]
    }

    pub fn var_name(&self, x: VarId) -> &str {
        &self.vars[x.index()]
    }

    pub fn lock_name(&self, l: LockId) -> &str {
        &self.locks[l.index()]
    }

    pub fn lookup_var(&self, name: &str) -> Option<VarId> {
        self.var_ids.get(name).copied()
    }

    pub fn lookup_thread(&self, name: &str) -> Option<ThreadId> {
        self.thread_ids.get(name).copied()
    }

    pub fn lookup_lock(&self, name: &str) -> Option<LockId> {
        self.lock_ids.get(name).copied()
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_locks(&self) -> usize {
        self.locks.len()
    }

    /// Canonical text of one event (without the trailing newline).
    pub fn render(&self, e: &Event) -> String {
        let obj = match e.op {
            Op::Read(x) | Op::Write(x) => self.var_name(x),
            Op::Acquire(l) | Op::Release(l) => self.lock_name(l),
        };
        format!("{}|{}({})", self.thread_name(e.tid), e.op.mnemonic(), obj)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("identifier `{0}` is used both as a variable and as a lock")]
pub struct NamespaceClash(pub String);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    BadThread,
    BadOp,
    BadObject,
    NamespaceClash,
    Io,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub token: String,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, token: &str, kind: ParseErrorKind, message: &str) -> Self {
        ParseError { line, token: token.to_owned(), kind, message: message.to_owned() }
    }
}

fn valid_object(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Parses one non-comment line. Returns `Ok(None)` for blank and comment lines.
fn parse_line(
    symbols: &mut Symbols,
    line_no: usize,
    raw: &str,
    idx: u64,
) -> Result<Option<Event>, ParseError> {
    let line = raw.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (tid, rest) = line
        .split_once('|')
        .ok_or_else(|| ParseError::new(line_no, line, ParseErrorKind::Syntax, "expected `tid|op(obj)`"))?;
    let digits = tid.strip_prefix('T').unwrap_or("");
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::new(line_no, tid, ParseErrorKind::BadThread, "thread id must be `T` followed by digits"));
    }
    let (op, tail) = rest
        .split_once('(')
        .ok_or_else(|| ParseError::new(line_no, rest, ParseErrorKind::Syntax, "expected `op(obj)`"))?;
    let obj = tail
        .strip_suffix(')')
        .ok_or_else(|| ParseError::new(line_no, tail, ParseErrorKind::Syntax, "missing `)`"))?;
    if !valid_object(obj) {
        return Err(ParseError::new(line_no, obj, ParseErrorKind::BadObject, "invalid object identifier"));
    }
    let clash = |e: NamespaceClash| {
        ParseError::new(line_no, &e.0, ParseErrorKind::NamespaceClash, "identifier used as both variable and lock")
    };
    let op = match op {
        "r" => Op::Read(symbols.var(obj).map_err(clash)?),
        "w" => Op::Write(symbols.var(obj).map_err(clash)?),
        "acq" => Op::Acquire(symbols.lock(obj).map_err(clash)?),
        "rel" => Op::Release(symbols.lock(obj).map_err(clash)?),
        other => return Err(ParseError::new(line_no, other, ParseErrorKind::BadOp, "unknown operation")),
    };
    let tid = symbols.thread(tid);
    Ok(Some(Event::new(idx, tid, op)))
}

/// Hex SHA-256 over the canonical serialization, computed incrementally.
#[derive(Clone, Default)]
pub struct TraceHasher(Sha256);

impl TraceHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update_line(&mut self, canonical: &str) {
        self.0.update(canonical.as_bytes());
        self.0.update(b"\n");
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// A materialized trace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<Event>,
    symbols: Symbols,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace, ParseError> {
        let mut symbols = Symbols::new();
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(e) = parse_line(&mut symbols, n + 1, line, events.len() as u64)? {
                events.push(e);
            }
        }
        Ok(Trace { events, symbols })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Trace, ParseError> {
        let mut stream = EventStream::new(reader);
        let mut events = Vec::new();
        while let Some(e) = stream.next_event()? {
            events.push(e);
        }
        Ok(Trace { events, symbols: stream.into_symbols() })
    }

    /// Builds a trace from events already interned in `symbols`. Indices are
    /// rewritten to the positions in `events`.
    pub fn from_parts(mut events: Vec<Event>, symbols: Symbols) -> Trace {
        for (i, e) in events.iter_mut().enumerate() {
            e.idx = i as u64;
        }
        Trace { events, symbols }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_threads(&self) -> usize {
        self.symbols.num_threads()
    }

    pub fn num_vars(&self) -> usize {
        self.symbols.num_vars()
    }

    pub fn num_locks(&self) -> usize {
        self.symbols.num_locks()
    }

    pub fn num_acquires(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.op, Op::Acquire(_))).count()
    }

    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 10);
        for e in &self.events {
            out.push_str(&self.symbols.render(e));
            out.push('\n');
        }
        out
    }

    pub fn content_hash(&self) -> String {
        let mut h = TraceHasher::new();
        for e in &self.events {
            h.update_line(&self.symbols.render(e));
        }
        h.finish()
    }

    pub fn check_well_formed(&self) -> WfReport {
        let mut tracker = LockTracker::new();
        for e in &self.events {
            if let Err(v) = tracker.observe(e) {
                return WfReport { violation: Some(v) };
            }
        }
        WfReport { violation: None }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Incremental parser over a line stream; events are produced without
/// materializing the trace.
pub struct EventStream<R> {
    reader: R,
    symbols: Symbols,
    hasher: TraceHasher,
    line_no: usize,
    next_idx: u64,
    buf: String,
}

impl<R: BufRead> EventStream<R> {
    pub fn new(reader: R) -> Self {
        EventStream {
            reader,
            symbols: Symbols::new(),
            hasher: TraceHasher::new(),
            line_no: 0,
            next_idx: 0,
            buf: String::new(),
        }
    }

    pub fn next_event(&mut self) -> Result<Option<Event>, ParseError> {
        loop {
            self.buf.clear();
            let n = self.reader.read_line(&mut self.buf).map_err(|e| {
                ParseError::new(self.line_no + 1, "", ParseErrorKind::Io, &e.to_string())
            })?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            if let Some(e) = parse_line(&mut self.symbols, self.line_no, &self.buf, self.next_idx)? {
                self.next_idx += 1;
                self.hasher.update_line(&self.symbols.render(&e));
                return Ok(Some(e));
            }
        }
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn events_read(&self) -> u64 {
        self.next_idx
    }

    /// Hash of everything read so far; equals `Trace::content_hash` once the
    /// stream is exhausted.
    pub fn hash_so_far(&self) -> String {
        self.hasher.clone().finish()
    }

    pub fn into_symbols(self) -> Symbols {
        self.symbols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WfViolationKind {
    /// Acquire of a lock currently held by another thread.
    DoubleAcquire,
    /// Release of a lock that nobody holds.
    ReleaseWithoutHold,
    /// Release of a lock held by a different thread.
    ReleaseWithoutMatchingAcquire,
    /// A thread acquiring a lock it already holds (locks are not reentrant).
    ReentrantAcquire,
}

impl fmt::Display for WfViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WfViolationKind::DoubleAcquire => "double-acquire-other-thread",
            WfViolationKind::ReleaseWithoutHold => "release-without-hold",
            WfViolationKind::ReleaseWithoutMatchingAcquire => "release-without-matching-acquire",
            WfViolationKind::ReentrantAcquire => "reentrant-acquire",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("ill-formed trace at event {idx}: {kind}")]
pub struct WfViolation {
    pub idx: u64,
    pub kind: WfViolationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WfReport {
    pub violation: Option<WfViolation>,
}

impl WfReport {
    pub fn ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// Streaming lock-semantics checker. Unmatched acquires at the end are legal.
#[derive(Clone, Debug, Default)]
pub struct LockTracker {
    holder: Vec<Option<ThreadId>>,
}

impl LockTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, e: &Event) -> Result<(), WfViolation> {
        let (l, acquire) = match e.op {
            Op::Acquire(l) => (l, true),
            Op::Release(l) => (l, false),
            _ => return Ok(()),
        };
        if self.holder.len() <= l.index() {
            self.holder.resize(l.index() + 1, None);
        }
        let slot = &mut self.holder[l.index()];
        let kind = match (acquire, *slot) {
            (true, None) => {
                *slot = Some(e.tid);
                return Ok(());
            }
            (true, Some(t)) if t == e.tid => WfViolationKind::ReentrantAcquire,
            (true, Some(_)) => WfViolationKind::DoubleAcquire,
            (false, Some(t)) if t == e.tid => {
                *slot = None;
                return Ok(());
            }
            (false, Some(_)) => WfViolationKind::ReleaseWithoutMatchingAcquire,
            (false, None) => WfViolationKind::ReleaseWithoutHold,
        };
        Err(WfViolation { idx: e.idx, kind })
    }

    pub fn holder(&self, l: LockId) -> Option<ThreadId> {
        self.holder.get(l.index()).copied().flatten()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("index {0} is out of range")]
    OutOfRange(usize),
    #[error("event {0} is not a read")]
    NotARead(usize),
    #[error("event {0} is not an acquire or release")]
    NotASyncEvent(usize),
}

/// Precomputed derived functions of a trace.
#[derive(Clone, Debug)]
pub struct TraceIndex {
    last_write: Vec<Option<u32>>,
    matching: Vec<Option<u32>>,
    prev: Vec<Option<u32>>,
    local_pos: Vec<u32>,
}

impl TraceIndex {
    pub fn new(trace: &Trace) -> Self {
        let n = trace.len();
        let mut last_write = vec![None; n];
        let mut matching = vec![None; n];
        let mut prev = vec![None; n];
        let mut local_pos = vec![0; n];

        let mut latest_write: HashMap<VarId, u32> = HashMap::new();
        let mut open: HashMap<(ThreadId, LockId), u32> = HashMap::new();
        let mut latest_of_thread: HashMap<ThreadId, (u32, u32)> = HashMap::new();

        for (i, e) in trace.events().iter().enumerate() {
            let i32_ = i as u32;
            match latest_of_thread.get(&e.tid) {
                Some(&(p, pos)) => {
                    prev[i] = Some(p);
                    local_pos[i] = pos + 1;
                }
                None => local_pos[i] = 0,
            }
            latest_of_thread.insert(e.tid, (i32_, local_pos[i]));
            match e.op {
                Op::Read(x) => last_write[i] = latest_write.get(&x).copied(),
                Op::Write(x) => {
                    latest_write.insert(x, i32_);
                }
                Op::Acquire(l) => {
                    open.insert((e.tid, l), i32_);
                }
                Op::Release(l) => {
                    if let Some(a) = open.remove(&(e.tid, l)) {
                        matching[i] = Some(a);
                        matching[a as usize] = Some(i32_);
                    }
                }
            }
        }
        TraceIndex { last_write, matching, prev, local_pos }
    }

    fn check(&self, i: usize) -> Result<(), IndexError> {
        if i >= self.prev.len() {
            Err(IndexError::OutOfRange(i))
        } else {
            Ok(())
        }
    }

    /// Last write to the same variable before read `i`.
    pub fn lw(&self, trace: &Trace, i: usize) -> Result<Option<usize>, IndexError> {
        self.check(i)?;
        match trace.event(i).op {
            Op::Read(_) => Ok(self.last_write[i].map(|j| j as usize)),
            _ => Err(IndexError::NotARead(i)),
        }
    }

    /// Matching release of an acquire, or matching acquire of a release.
    pub fn match_of(&self, trace: &Trace, i: usize) -> Result<Option<usize>, IndexError> {
        self.check(i)?;
        match trace.event(i).op {
            Op::Acquire(_) | Op::Release(_) => Ok(self.matching[i].map(|j| j as usize)),
            _ => Err(IndexError::NotASyncEvent(i)),
        }
    }

    /// Previous event of the same thread.
    pub fn prev(&self, i: usize) -> Result<Option<usize>, IndexError> {
        self.check(i)?;
        Ok(self.prev[i].map(|j| j as usize))
    }

    /// Number of earlier events of the same thread.
    pub fn local_pos(&self, i: usize) -> usize {
        self.local_pos[i] as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA1: &str = "T3|acq(l)\nT1|w(y)\nT2|r(y)\nT1|w(x)\nT3|r(x)\nT3|rel(l)\nT2|acq(l)\nT2|rel(l)\nT2|w(x)\n";
    const SIGMA2: &str = "T3|acq(l)\nT1|w(x)\nT3|r(x)\nT3|rel(l)\nT2|acq(l)\nT2|rel(l)\nT2|w(x)\n";

    fn backward_lw(tr: &Trace, i: usize) -> Option<usize> {
        let x = tr.event(i).op.var().unwrap();
        (0..i).rev().find(|&j| tr.event(j).op == Op::Write(x))
    }

    fn backward_prev(tr: &Trace, i: usize) -> Option<usize> {
        (0..i).rev().find(|&j| tr.event(j).tid == tr.event(i).tid)
    }

    #[test]
    fn parses_two_events() {
        let tr = Trace::parse("T1|w(x)\nT2|r(x)").unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.num_threads(), 2);
        assert_eq!(tr.num_vars(), 1);
        assert_eq!(tr.symbols().thread_name(ThreadId(1)), "T2");
    }

    #[test]
    fn parses_sigma1() {
        let tr = Trace::parse(SIGMA1).unwrap();
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.num_acquires(), 2);
        assert_eq!(tr.num_threads(), 3);
    }

    #[test]
    fn rejects_unknown_op() {
        let err = Trace::parse("T1|q(x)").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.kind, ParseErrorKind::BadOp);
        assert_eq!(err.token, "q");
    }

    #[test]
    fn rejects_bad_thread_and_object() {
        assert_eq!(Trace::parse("X1|r(x)").unwrap_err().kind, ParseErrorKind::BadThread);
        assert_eq!(Trace::parse("T|r(x)").unwrap_err().kind, ParseErrorKind::BadThread);
        assert_eq!(Trace::parse("T1|r(9x)").unwrap_err().kind, ParseErrorKind::BadObject);
        assert_eq!(Trace::parse("T1 r(x)").unwrap_err().kind, ParseErrorKind::Syntax);
        let e = Trace::parse("T1|w(x)\n\nT1|r(x").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn namespace_clash_is_an_error() {
        let err = Trace::parse("T1|w(m)\nT1|acq(m)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NamespaceClash);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let tr = Trace::parse("# header\n\nT1|w(x)\n  # indented comment\nT2|w(x)\n").unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.event(1).idx, 1);
    }

    #[test]
    fn well_formedness() {
        let tr = Trace::parse("T1|acq(l)\nT2|acq(l)").unwrap();
        let v = tr.check_well_formed().violation.unwrap();
        assert_eq!((v.idx, v.kind), (1, WfViolationKind::DoubleAcquire));

        let tr = Trace::parse("T1|rel(l)").unwrap();
        let v = tr.check_well_formed().violation.unwrap();
        assert_eq!((v.idx, v.kind), (0, WfViolationKind::ReleaseWithoutHold));

        let tr = Trace::parse("T1|acq(l)\nT2|rel(l)").unwrap();
        let v = tr.check_well_formed().violation.unwrap();
        assert_eq!((v.idx, v.kind), (1, WfViolationKind::ReleaseWithoutMatchingAcquire));

        let tr = Trace::parse("T1|acq(l)\nT1|acq(l)").unwrap();
        assert_eq!(tr.check_well_formed().violation.unwrap().kind, WfViolationKind::ReentrantAcquire);

        assert!(Trace::parse("T1|acq(l)").unwrap().check_well_formed().ok());
        assert!(Trace::parse(SIGMA1).unwrap().check_well_formed().ok());
    }

    #[test]
    fn conflict_definition() {
        let tr = Trace::parse("T1|w(x)\nT2|r(x)\nT1|r(x)\nT2|w(y)\nT1|w(x)").unwrap();
        let e = tr.events();
        assert!(conflicting(&e[0], &e[1]));
        assert!(conflicting(&e[1], &e[0]));
        assert!(!conflicting(&e[1], &e[2]));
        assert!(!conflicting(&e[0], &e[4]));
        assert!(!conflicting(&e[3], &e[4]));
    }

    #[test]
    fn spans() {
        assert_eq!(span(0, 1), 2);
        assert_eq!(span(5, 5), 1);
        assert_eq!(span(3, 9), 7);
    }

    #[test]
    #[should_panic]
    fn span_requires_ordered_indices() {
        span(4, 3);
    }

    #[test]
    fn derived_functions_on_sigma() {
        let tr = Trace::parse(SIGMA2).unwrap();
        let ix = TraceIndex::new(&tr);
        // T3|r(x) reads T1|w(x)
        assert_eq!(ix.lw(&tr, 2).unwrap(), Some(1));
        assert_eq!(ix.lw(&tr, 0), Err(IndexError::NotARead(0)));

        let tr = Trace::parse(SIGMA1).unwrap();
        let ix = TraceIndex::new(&tr);
        assert_eq!(ix.match_of(&tr, 0).unwrap(), Some(5));
        assert_eq!(ix.match_of(&tr, 5).unwrap(), Some(0));
        assert_eq!(ix.prev(8).unwrap(), Some(7));
        assert_eq!(ix.prev(0).unwrap(), None);
        assert_eq!(ix.prev(1).unwrap(), None);
        assert_eq!(ix.match_of(&tr, 1), Err(IndexError::NotASyncEvent(1)));
        assert_eq!(ix.prev(9), Err(IndexError::OutOfRange(9)));

        let tr = Trace::parse("T1|r(x)\nT1|acq(l)").unwrap();
        let ix = TraceIndex::new(&tr);
        assert_eq!(ix.lw(&tr, 0).unwrap(), None);
        assert_eq!(ix.match_of(&tr, 1).unwrap(), None);
    }

    #[test]
    fn derived_functions_match_backward_scans() {
        use crate::tracegen::{gen_trace, GenParams};
        for seed in 0..60 {
            let p = GenParams { threads: 3, vars: 3, locks: 2, length: 80, lock_density: 0.3, seed, ..GenParams::default() };
            let tr = gen_trace(&p).unwrap();
            let ix = TraceIndex::new(&tr);
            for i in 0..tr.len() {
                assert_eq!(ix.prev(i).unwrap(), backward_prev(&tr, i));
                if matches!(tr.event(i).op, Op::Read(_)) {
                    assert_eq!(ix.lw(&tr, i).unwrap(), backward_lw(&tr, i));
                }
                if matches!(tr.event(i).op, Op::Release(_)) {
                    let a = ix.match_of(&tr, i).unwrap().expect("release has a match");
                    assert_eq!(ix.match_of(&tr, a).unwrap(), Some(i));
                }
            }
        }
    }

    #[test]
    fn stream_hash_equals_trace_hash() {
        let tr = Trace::parse(SIGMA1).unwrap();
        let mut s = EventStream::new(SIGMA1.as_bytes());
        while s.next_event().unwrap().is_some() {}
        assert_eq!(s.hash_so_far(), tr.content_hash());
        assert_eq!(s.events_read(), 9);
    }
}
