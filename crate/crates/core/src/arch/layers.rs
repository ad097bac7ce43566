use super::{ArchError, ParamId, ParamRegistry};
use crate::tensor::{ConvParams, Graph, Real, Tensor, Var};

/// Spatial resolution a layer runs at, for cost accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    /// Input (low-resolution) grid.
    Low,
    /// Output (high-resolution) grid.
    High,
}

/// Multiply-accumulate footprint of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerCost {
    Conv { cin: usize, cout: usize, kernel: usize, groups: usize, at: Resolution },
    /// The two channel-by-channel products of a transposed attention layer.
    ChannelAttention { channels: usize, heads: usize },
}

/// Shape-preserving 2-D convolution with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub groups: usize,
}

impl Conv {
    pub fn new<T: Real>(
        reg: &mut ParamRegistry<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        groups: usize,
    ) -> Result<Self, ArchError> {
        let weight = reg.register(format!("{name}.weight"), Tensor::zeros(&[cout, cin / groups, kernel, kernel]))?;
        let bias = reg.register(format!("{name}.bias"), Tensor::zeros(&[cout]))?;
        Ok(Self { weight, bias, cin, cout, kernel, groups })
    }

    pub fn pointwise<T: Real>(reg: &mut ParamRegistry<T>, name: &str, cin: usize, cout: usize) -> Result<Self, ArchError> {
        Self::new(reg, name, cin, cout, 1, 1)
    }

    pub fn depthwise<T: Real>(reg: &mut ParamRegistry<T>, name: &str, channels: usize) -> Result<Self, ArchError> {
        Self::new(reg, name, channels, channels, 3, channels)
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        Ok(g.conv2d(x, p[self.weight], Some(p[self.bias]), ConvParams::same(self.kernel, self.groups))?)
    }

    pub fn cost(&self, at: Resolution) -> LayerCost {
        LayerCost::Conv { cin: self.cin, cout: self.cout, kernel: self.kernel, groups: self.groups, at }
    }
}

/// Channel layer norm with per-channel affine.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl Norm {
    pub fn new<T: Real>(reg: &mut ParamRegistry<T>, name: &str, channels: usize, eps: f64) -> Result<Self, ArchError> {
        let gamma = reg.register(format!("{name}.gamma"), Tensor::full(&[channels], T::one()))?;
        let beta = reg.register(format!("{name}.beta"), Tensor::zeros(&[channels]))?;
        Ok(Self { gamma, beta, eps })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        Ok(g.layer_norm(x, p[self.gamma], p[self.beta], T::lit(self.eps))?)
    }
}
