//! Online detection of short data races.
//!
//! Two families of detectors share one streaming interface
//! ([`detector::RaceDetector`]): happens-before detectors in [`hb`] and
//! sync-preserving detectors in [`sp`]. Each comes as a whole-trace baseline
//! and as a variant that only looks for races whose two events are at most
//! `w` events apart, keeping memory proportional to the window.
//!
//! [`oracle`] recomputes both race notions by brute force on small traces and
//! [`tracegen`] produces seeded random traces for testing and benchmarks.

pub mod clocks;
pub mod detector;
pub mod harness;
pub mod hb;
pub mod oracle;
pub mod report;
pub mod sp;
pub mod trace;
pub mod tracegen;

pub use detector::{run_stream, run_trace, Driver, RaceDetector, RunError, RunOptions};
pub use hb::{FastTrack, ShortFastTrack};
pub use report::{Findings, Granularity, RacePair, RaceReport};
pub use sp::ShortSyncP;
pub use trace::{Event, Op, Trace};
