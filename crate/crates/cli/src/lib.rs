//! Experiment harness: Monte Carlo campaigns over the graph and matrix
//! models, deterministic records, empirical moments, and comparison against
//! the closed-form limits.

pub mod harness;
pub mod report;

pub use harness::{run_experiment, ExperimentConfig, ExperimentRecord, ModelSpec, PrimeSpec};
pub use report::{compare_to_theory, tv_between_records, ComparisonReport, Verdict};
