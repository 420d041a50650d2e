//! Dense residual MLP engine: forward pass, reverse-mode gradients, Adam,
//! normalization and checkpoints. All arithmetic is `f64`.

mod arch;
mod checkpoint;
mod gradcheck;
mod model;
mod normalizer;
mod regressor;
mod train;

pub use arch::{ModelArch, SkipPattern};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use model::{init_model, Dense, ForwardCache, Gradients, Model};
pub use normalizer::{fit_normalizer, Normalizer, STD_FLOOR};
pub use regressor::{Locator, SignalModel};
pub use train::{loss_mse, loss_mse_batch, train, Phase, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
