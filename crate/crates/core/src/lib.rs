//! Interpretability-regularized mortality classifiers for multiple myeloma
//! cohorts: synthetic cohort generation, R-ISS staging, auxiliary-alignment
//! and stage-consistency regularizers, training sweeps and Shapley analysis.

pub mod cohort;
pub mod error;
pub mod evaluation;
pub mod manifest;
pub mod models;
pub mod pipeline;
pub mod regularization;
pub mod staging;
pub mod training;

pub use error::{Error, Result};
