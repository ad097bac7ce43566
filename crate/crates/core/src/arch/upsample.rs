use super::layers::{Conv, LayerCost, Resolution};
use super::{ArchError, ParamRegistry};
use crate::tensor::{Graph, Real, Var};

/// Backbone upsampler: 3×3 conv to `hr_channels·s²`, pixel shuffle, then a
/// 3×3 conv at HR resolution down to RGB.
#[derive(Clone, Debug, PartialEq)]
pub struct BackboneUpsampler {
    pub scale: usize,
    pub expand: Conv,
    pub refine: Conv,
}

impl BackboneUpsampler {
    pub fn new<T: Real>(
        reg: &mut ParamRegistry<T>,
        name: &str,
        channels: usize,
        hr_channels: usize,
        scale: usize,
    ) -> Result<Self, ArchError> {
        Ok(Self {
            scale,
            expand: Conv::new(reg, &format!("{name}.expand"), channels, hr_channels * scale * scale, 3, 1)?,
            refine: Conv::new(reg, &format!("{name}.refine"), hr_channels, 3, 3, 1)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        let y = self.expand.forward(g, p, x)?;
        let y = g.pixel_shuffle(y, self.scale)?;
        self.refine.forward(g, p, y)
    }

    pub fn costs(&self) -> Vec<LayerCost> {
        vec![self.expand.cost(Resolution::Low), self.refine.cost(Resolution::High)]
    }
}

/// Global-residual upsampler: 1×1 conv to `3·s²` channels, then pixel shuffle.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualUpsampler {
    pub scale: usize,
    pub expand: Conv,
}

impl ResidualUpsampler {
    pub fn new<T: Real>(reg: &mut ParamRegistry<T>, name: &str, channels: usize, scale: usize) -> Result<Self, ArchError> {
        Ok(Self { scale, expand: Conv::pointwise(reg, &format!("{name}.expand"), channels, 3 * scale * scale)? })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        let y = self.expand.forward(g, p, x)?;
        Ok(g.pixel_shuffle(y, self.scale)?)
    }

    pub fn costs(&self) -> Vec<LayerCost> {
        vec![self.expand.cost(Resolution::Low)]
    }
}
