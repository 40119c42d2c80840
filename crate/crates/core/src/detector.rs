//! The streaming detector interface and a driver that feeds events to it.

use std::io::BufRead;

use thiserror::Error;

use crate::report::{Counters, Findings, Granularity, PairSink};
use crate::trace::{Event, EventStream, LockTracker, ParseError, Trace, WfViolation};

/// Internal state inconsistency found by a full-state scan.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invariant violated after event {after_event}: {message}")]
pub struct InvariantViolation {
    pub after_event: u64,
    pub message: String,
}

/// Peak resource counters a detector tracks itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DetectorStats {
    /// Event-local metadata records currently allocated.
    pub records: u64,
    pub peak_records: u64,
    pub peak_live_clocks: u64,
    pub peak_retained: u64,
}

/// A one-pass race detector. Events must form a well-formed trace; the
/// driver checks lock semantics before handing events over.
pub trait RaceDetector {
    fn process(&mut self, e: &Event, sink: &mut PairSink);

    fn stats(&self) -> DetectorStats;

    /// Full scan of the internal state; expensive.
    fn check_invariants(&self) -> Result<(), String>;
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    IllFormed(#[from] WfViolation),
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub granularity: Granularity,
    pub first_race: bool,
    /// Run `check_invariants` after every event.
    pub assert_invariants: bool,
}

/// Drives a detector over a sequence of events.
pub struct Driver<D> {
    detector: D,
    sink: PairSink,
    locks: LockTracker,
    opts: RunOptions,
    events: u64,
}

impl<D: RaceDetector> Driver<D> {
    pub fn new(detector: D, opts: RunOptions) -> Self {
        Driver {
            detector,
            sink: PairSink::new(opts.granularity, opts.first_race),
            locks: LockTracker::new(),
            opts,
            events: 0,
        }
    }

    /// Feeds one event. Returns `false` once the run should stop.
    pub fn feed(&mut self, e: &Event) -> Result<bool, RunError> {
        if self.sink.should_stop() {
            return Ok(false);
        }
        self.locks.observe(e)?;
        self.detector.process(e, &mut self.sink);
        self.events += 1;
        if self.opts.assert_invariants {
            self.detector
                .check_invariants()
                .map_err(|message| InvariantViolation { after_event: e.idx, message })?;
        }
        Ok(!self.sink.should_stop())
    }

    pub fn detector(&self) -> &D {
        &self.detector
    }

    pub fn finish(self) -> Findings {
        let st = self.detector.stats();
        let counters = Counters {
            events: self.events,
            races: self.sink.count(),
            racy_vars: 0,
            peak_records: st.peak_records,
            peak_live_clocks: st.peak_live_clocks,
            peak_retained: st.peak_retained,
        };
        let mut f = self.sink.finish(counters);
        f.counters.racy_vars = f.racy_vars.len() as u64;
        f
    }
}

pub fn run_events<D, I>(detector: D, events: I, opts: RunOptions) -> Result<Findings, RunError>
where
    D: RaceDetector,
    I: IntoIterator<Item = Event>,
{
    let mut d = Driver::new(detector, opts);
    for e in events {
        if !d.feed(&e)? {
            break;
        }
    }
    Ok(d.finish())
}

pub fn run_trace<D: RaceDetector>(detector: D, tr: &Trace, opts: RunOptions) -> Result<Findings, RunError> {
    run_events(detector, tr.events().iter().copied(), opts)
}

/// Parses and analyzes a stream without materializing the trace. Returns the
/// findings and the stream (for its symbols and hash).
pub fn run_stream<D: RaceDetector, R: BufRead>(
    detector: D,
    mut stream: EventStream<R>,
    opts: RunOptions,
) -> Result<(Findings, EventStream<R>), RunError> {
    let mut d = Driver::new(detector, opts);
    while let Some(e) = stream.next_event()? {
        if !d.feed(&e)? {
            break;
        }
    }
    Ok((d.finish(), stream))
}

impl<T: RaceDetector + ?Sized> RaceDetector for Box<T> {
    fn process(&mut self, e: &Event, sink: &mut PairSink) {
        (**self).process(e, sink)
    }

    fn stats(&self) -> DetectorStats {
        (**self).stats()
    }

    fn check_invariants(&self) -> Result<(), String> {
        (**self).check_invariants()
    }
}
