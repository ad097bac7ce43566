//! The SCET network and its persistence.

pub mod checkpoint;
mod config;
mod gdfn;
mod layers;
mod mdta;
mod model;
mod registry;
mod scpa;
mod upsample;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointError};
pub use config::ScetConfig;
pub use gdfn::GdfnLayer;
pub use layers::{Conv, LayerCost, Norm, Resolution};
pub use mdta::MdtaLayer;
pub use model::{block_name, EfficientTransformer, ScetLayout, ScetModel};
pub use registry::{ParamId, ParamRegistry, Parameter};
pub use scpa::ScpaBlock;
pub use upsample::{BackboneUpsampler, ResidualUpsampler};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{layer}: expected {expected} input channels, got {got}")]
    Channels { layer: &'static str, expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParameter(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
