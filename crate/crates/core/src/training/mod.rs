//! L1 objective, Adam with cosine decay, patch sampling and the training loop.

mod config;
mod data;
mod optim;
mod trainer;

use thiserror::Error;

use crate::arch::{ArchError, CheckpointError};
use crate::imaging::ImagingError;
use crate::tensor::{Real, Tensor, TensorError};

pub use config::{adjusted_patch, TrainConfig, PRESETS};
pub use data::{augment, sample_patch, stack_batch, Dataset, Dihedral, SamplePair};
pub use optim::{adam_step, cosine_lr, AdamConfig, AdamState};
pub use trainer::{render_loss_csv, train_loop, LossEntry, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset {0} holds no PNG images")]
    EmptyDataset(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("no gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("non-finite loss {loss} at iteration {iter}")]
    NonFinite { iter: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Mean absolute error, returned as a scalar tensor.
pub fn l1_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if pred.shape() != target.shape() {
        return Err(TensorError::Shape {
            op: "l1_loss",
            detail: format!("{:?} vs {:?}", pred.shape(), target.shape()),
        });
    }
    let n = T::from_usize(pred.numel().max(1)).expect("count fits");
    let total = pred.data().iter().zip(target.data()).fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());
    Ok(Tensor::scalar(total / n))
}
