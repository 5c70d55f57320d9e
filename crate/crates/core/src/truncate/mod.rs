//! Unsupervised truncation methods: Fixed-k, Greedy-k and Surprise.

mod cvm;
mod fixed;
mod gpd;
mod optim;
mod surprise;

pub use cvm::cvm_statistic;
pub use fixed::{fixed_k, greedy_k, greedy_k_from_means, mean_target_curve, FIXED_K_PRESETS};
pub use gpd::{fit_gpd, gpd_loglik, Gpd, GpdFit, GPD_SHAPE_GRID};
pub use surprise::{
    calibrated_probabilities, cut_from_probabilities, surprise_truncate, CandidateThreshold,
    SurpriseConfig, SurpriseOutcome,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TruncateError {
    #[error("no training queries")]
    EmptyTraining,
    #[error("sample {value} lies outside the GPD support (upper end {upper})")]
    SupportViolation { value: f64, upper: f64 },
    #[error("GPD scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("all {0} samples are equal")]
    DegenerateSample(usize),
    #[error("{got} samples, at least {need} required")]
    TooFewSamples { got: usize, need: usize },
    #[error("invalid surprise configuration: {0}")]
    InvalidConfig(String),
}
