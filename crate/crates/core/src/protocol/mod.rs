//! The data-selection experiment: train a locator on D1, select extra
//! candidates, fine-tune on D2, and compare 90% errors before and after.

mod config;
mod metrics;
mod runner;
mod summary;

pub use config::{bs_subset, ExperimentConfig, ExperimentSettings, Strategy, TestSet};
pub use metrics::{gain, q_quantile};
pub use runner::{
    run_experiment, run_realization, ExperimentOutcome, IndexSets, RealizationContext, RealizationResult,
    RunStatus, TestMetrics,
};
pub use summary::{summarize, SummaryRow, SummaryTable};

use thiserror::Error;

use crate::neural::NeuralError;
use crate::scene::SceneError;
use crate::selection::SelectionError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid value for {key}: {constraint}")]
    InvalidConfig { key: String, constraint: String },
    #[error("empty input")]
    EmptyInput,
    #[error("quantile level {0} outside (0, 1]")]
    BadQuantile(f64),
    #[error("initial error is zero; gain undefined")]
    ZeroInitialError,
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("bookkeeping violation: {0}")]
    Bookkeeping(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}
