//! Decision trees and random forests trained from scratch, exact tree
//! Shapley explanations, majority-filtered combination of weak-learner
//! explanations (AXOM), and the mean incremental-ratio robustness metric
//! used to compare them.

pub mod axom;
pub mod cv;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explainers;
pub mod forest;
pub mod heatmap;
pub mod model_io;
pub mod rng;
pub mod robustness;
pub mod shap;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
