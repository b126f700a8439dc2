//! Robustness benchmark engine.
//!
//! A single rejection threshold is calibrated on correctly classified clean
//! samples and then applied unchanged to five types of test data (clean,
//! corrupt, adversarial, novel, unrecognisable). Each sample is scored as
//! correctly or wrongly accepted/rejected, and the Detection Accuracy Rate
//! (DAR) is reported per data type together with its unweighted mean.
//!
//! The crate is model agnostic: it consumes logit files produced elsewhere.
//! [`imagegen`] contains the deterministic generators for the unrecognisable
//! image datasets, and [`fixture`] builds a synthetic benchmark that runs
//! end-to-end without any ML framework.

pub mod bench;
pub mod datamodel;
mod error;
pub mod fixture;
pub mod imagegen;
pub mod metrics;
pub mod rng;
pub mod scores;

pub use bench::{
    aggregate_summaries, aggregate_trials, calibrate, evaluate, evaluate_with, mean_over_types, parse_report,
    render_aggregate, render_report, render_summary, BenchmarkReport, CellStats, DatasetResult, LegacyMetrics,
    ReportFormat, ReportSummary, TrialAggregate, TypeResult,
};
pub use datamodel::{
    load_logits, load_manifest, write_logits, DataType, DatasetRef, EvalConfig, LogitRecord, Manifest, Pooling,
};
pub use error::{Error, Result};
pub use imagegen::{GeneratorKind, ImageTensor, Shape};
pub use metrics::{CalibratedThreshold, ConfusionCounts, Outcome};
pub use scores::{ScoreMethod, Scorer};
