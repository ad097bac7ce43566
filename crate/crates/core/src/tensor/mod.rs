//! Rank-≤4 tensors with tape-based reverse-mode differentiation.

mod denormal;
mod gradcheck;
mod graph;
pub mod kernels;
mod real;
mod value;

pub use denormal::FlushDenormals;
pub use gradcheck::grad_check;
pub use graph::{Graph, Var};
pub use kernels::ConvParams;
pub use real::Real;
pub use value::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("tensor rank {rank} outside 1..=4")]
    Rank { rank: usize },
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("backward needs a single-element loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{0}")]
    InvalidArgument(String),
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Self::Shape { op, detail: detail.into() }
    }
}
