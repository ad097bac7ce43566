use super::layers::{Conv, LayerCost, Norm, Resolution};
use super::{ArchError, ParamRegistry};
use crate::tensor::{Graph, Real, Var};

/// Gated-Dconv feed-forward network: a GELU path gates a linear path of the
/// same hidden width before projecting back, with a residual around it.
#[derive(Clone, Debug, PartialEq)]
pub struct GdfnLayer {
    pub channels: usize,
    pub hidden: usize,
    pub norm: Norm,
    pub gate_proj: Conv,
    pub gate_dw: Conv,
    pub value_proj: Conv,
    pub value_dw: Conv,
    pub out_proj: Conv,
}

impl GdfnLayer {
    pub fn new<T: Real>(
        reg: &mut ParamRegistry<T>,
        name: &str,
        channels: usize,
        hidden: usize,
        eps: f64,
    ) -> Result<Self, ArchError> {
        let sub = |s: &str| format!("{name}.{s}");
        Ok(Self {
            channels,
            hidden,
            norm: Norm::new(reg, &sub("norm"), channels, eps)?,
            gate_proj: Conv::pointwise(reg, &sub("gate_proj"), channels, hidden)?,
            gate_dw: Conv::depthwise(reg, &sub("gate_dw"), hidden)?,
            value_proj: Conv::pointwise(reg, &sub("value_proj"), channels, hidden)?,
            value_dw: Conv::depthwise(reg, &sub("value_dw"), hidden)?,
            out_proj: Conv::pointwise(reg, &sub("out_proj"), hidden, channels)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        let c = g.value(x).shape().get(1).copied().unwrap_or(0);
        if c != self.channels {
            return Err(ArchError::Channels { layer: "gdfn", expected: self.channels, got: c });
        }
        let normed = self.norm.forward(g, p, x)?;
        let gate = self.gate_proj.forward(g, p, normed)?;
        let gate = self.gate_dw.forward(g, p, gate)?;
        let gate = g.gelu(gate);
        let value = self.value_proj.forward(g, p, normed)?;
        let value = self.value_dw.forward(g, p, value)?;
        let gated = g.mul(gate, value)?;
        let out = self.out_proj.forward(g, p, gated)?;
        Ok(g.add(out, x)?)
    }

    pub fn costs(&self) -> Vec<LayerCost> {
        [&self.gate_proj, &self.gate_dw, &self.value_proj, &self.value_dw, &self.out_proj]
            .iter()
            .map(|c| c.cost(Resolution::Low))
            .collect()
    }
}
