//! Configuration-driven experiments with deterministic, resumable output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_key_values, ExperimentConfig, ExperimentKind};
pub use output::{compare, compare_points, read_csv, ComparisonReport, EnsembleResult, Manifest, Point, Tolerance};
pub use run::{run_experiment, RunOutput};
