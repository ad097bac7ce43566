use super::layers::{Conv, LayerCost, Resolution};
use super::{ArchError, ParamRegistry};
use crate::tensor::{Graph, Real, Var};

/// Self-calibrated convolution block with pixel attention.
///
/// Two half-width branches: the upper one gates a 3×3 conv by a sigmoid
/// pixel-attention map, the lower one is a plain 3×3 conv. Their
/// concatenation is fused by a 1×1 conv and added to the block input.
#[derive(Clone, Debug, PartialEq)]
pub struct ScpaBlock {
    pub width: usize,
    pub reduce_upper: Conv,
    pub reduce_lower: Conv,
    pub attn_conv: Conv,
    pub pa_conv: Conv,
    pub post_conv: Conv,
    pub lower_conv: Conv,
    pub fuse: Conv,
}

impl ScpaBlock {
    pub fn new<T: Real>(reg: &mut ParamRegistry<T>, name: &str, width: usize) -> Result<Self, ArchError> {
        let half = width / 2;
        Ok(Self {
            width,
            reduce_upper: Conv::pointwise(reg, &format!("{name}.reduce_upper"), width, half)?,
            reduce_lower: Conv::pointwise(reg, &format!("{name}.reduce_lower"), width, half)?,
            attn_conv: Conv::new(reg, &format!("{name}.attn_conv"), half, half, 3, 1)?,
            pa_conv: Conv::pointwise(reg, &format!("{name}.pa_conv"), half, half)?,
            post_conv: Conv::new(reg, &format!("{name}.post_conv"), half, half, 3, 1)?,
            lower_conv: Conv::new(reg, &format!("{name}.lower_conv"), half, half, 3, 1)?,
            fuse: Conv::pointwise(reg, &format!("{name}.fuse"), width, width)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        let c = g.value(x).shape().get(1).copied().unwrap_or(0);
        if c != self.width {
            return Err(ArchError::Channels { layer: "scpa", expected: self.width, got: c });
        }
        let upper = self.reduce_upper.forward(g, p, x)?;
        let features = self.attn_conv.forward(g, p, upper)?;
        let logits = self.pa_conv.forward(g, p, upper)?;
        let attention = g.sigmoid(logits);
        let attended = g.mul(features, attention)?;
        let upper_out = self.post_conv.forward(g, p, attended)?;

        let lower = self.reduce_lower.forward(g, p, x)?;
        let lower_out = self.lower_conv.forward(g, p, lower)?;

        let merged = g.concat_channels(upper_out, lower_out)?;
        let fused = self.fuse.forward(g, p, merged)?;
        Ok(g.add(fused, x)?)
    }

    pub fn costs(&self) -> Vec<LayerCost> {
        [
            &self.reduce_upper,
            &self.reduce_lower,
            &self.attn_conv,
            &self.pa_conv,
            &self.post_conv,
            &self.lower_conv,
            &self.fuse,
        ]
        .iter()
        .map(|c| c.cost(Resolution::Low))
        .collect()
    }
}
