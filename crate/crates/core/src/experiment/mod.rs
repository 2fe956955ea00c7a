//! End-to-end experiment pipeline: configuration, staged execution with
//! artifact caching, and the markdown report.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, HeatmapRequest};
pub use report::report;
pub use run::{prepare, run, Prepared, RunManifest, Stage, TrainingSummary};
