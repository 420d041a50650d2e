//! Active-learning data selection for radio-fingerprint positioning.
//!
//! The crate synthesizes indoor-factory (dense clutter, high base station)
//! path-gain fingerprint datasets, trains residual MLP regressors from scratch,
//! selects extra training positions with random, genie or practical
//! strategies, and measures the resulting change in 90% positioning error.
//!
//! Module map:
//! - [`scene`]: factory geometry, statistical channel, correlated fields, datasets.
//! - [`neural`]: dense residual MLP, reverse-mode gradients, Adam, checkpoints.
//! - [`selection`]: the three candidate-selection strategies.
//! - [`protocol`]: realization runner, metrics and aggregation.
//! - [`cli`]: config files, CSV/manifest output and SVG plots.

pub mod cli;
pub mod exec;
pub mod neural;
pub mod protocol;
pub mod scene;
pub mod seed;
pub mod selection;

pub use exec::Execution;
