//! Falsification harness for linear hidden-state probes.
//!
//! Operates on cached feature arrays at desk scale: ingest npy feature
//! files with per-response labels, fit standardize-then-logistic probes,
//! and run the five-step protocol (within-distribution CV, fresh
//! transfer, per-axis sweep, multi-layer pooling, cross-model
//! replication) with gate verdicts, failure-mode classification, and a
//! byte-reproducible report. Head-level cohort attribution and
//! tempering-plan emission operate on cached per-head activation blocks.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::MathError;
