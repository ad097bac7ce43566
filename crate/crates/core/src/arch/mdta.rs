use super::layers::{Conv, LayerCost, Norm, Resolution};
use super::{ArchError, ParamId, ParamRegistry};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Multi-Dconv head transposed attention.
///
/// Q, K and V come from a 1×1 conv followed by a 3×3 depthwise conv of the
/// layer-normed input. Attention is taken across channels, so each head
/// builds a `(C/heads) × (C/heads)` map whatever the spatial extent.
#[derive(Clone, Debug, PartialEq)]
pub struct MdtaLayer {
    pub channels: usize,
    pub heads: usize,
    pub norm: Norm,
    pub q_proj: Conv,
    pub q_dw: Conv,
    pub k_proj: Conv,
    pub k_dw: Conv,
    pub v_proj: Conv,
    pub v_dw: Conv,
    pub out_proj: Conv,
    /// One learnable temperature per head.
    pub temperature: ParamId,
}

impl MdtaLayer {
    pub fn new<T: Real>(
        reg: &mut ParamRegistry<T>,
        name: &str,
        channels: usize,
        heads: usize,
        eps: f64,
    ) -> Result<Self, ArchError> {
        if heads == 0 || channels % heads != 0 {
            return Err(ArchError::InvalidConfig(format!("{channels} channels not divisible by {heads} heads")));
        }
        let sub = |s: &str| format!("{name}.{s}");
        Ok(Self {
            channels,
            heads,
            norm: Norm::new(reg, &sub("norm"), channels, eps)?,
            q_proj: Conv::pointwise(reg, &sub("q_proj"), channels, channels)?,
            q_dw: Conv::depthwise(reg, &sub("q_dw"), channels)?,
            k_proj: Conv::pointwise(reg, &sub("k_proj"), channels, channels)?,
            k_dw: Conv::depthwise(reg, &sub("k_dw"), channels)?,
            v_proj: Conv::pointwise(reg, &sub("v_proj"), channels, channels)?,
            v_dw: Conv::depthwise(reg, &sub("v_dw"), channels)?,
            out_proj: Conv::pointwise(reg, &sub("out_proj"), channels, channels)?,
            temperature: reg.register(sub("temperature"), Tensor::full(&[heads], T::one()))?,
        })
    }

    /// Splits `[n, c, h, w]` into `[n, heads, c / heads, h·w]`.
    fn to_heads<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Result<Var, ArchError> {
        let (n, c, h, w) = g.value(x).dims4()?;
        Ok(g.reshape(x, &[n, self.heads, c / self.heads, h * w])?)
    }

    /// Per-head attention maps `[n, heads, C/heads, C/heads]` together with V̂.
    fn attend<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<(Var, Var), ArchError> {
        let c = g.value(x).shape().get(1).copied().unwrap_or(0);
        if c != self.channels {
            return Err(ArchError::Channels { layer: "mdta", expected: self.channels, got: c });
        }
        let normed = self.norm.forward(g, p, x)?;
        let mut project = |proj: &Conv, dw: &Conv| -> Result<Var, ArchError> {
            let y = proj.forward(g, p, normed)?;
            dw.forward(g, p, y)
        };
        let q = project(&self.q_proj, &self.q_dw)?;
        let k = project(&self.k_proj, &self.k_dw)?;
        let v = project(&self.v_proj, &self.v_dw)?;

        // K̂ is (c × hw); Q̂ and V̂ are (hw × c).
        let k_hat = self.to_heads(g, k)?;
        let q_rows = self.to_heads(g, q)?;
        let q_hat = g.transpose_last2(q_rows)?;
        let v_rows = self.to_heads(g, v)?;
        let v_hat = g.transpose_last2(v_rows)?;

        let logits = g.matmul(k_hat, q_hat)?;
        let scaled = g.div_per_head(logits, p[self.temperature])?;
        Ok((g.softmax_lastdim(scaled), v_hat))
    }

    /// The row-softmaxed channel attention map of every head.
    pub fn attention_map<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        Ok(self.attend(g, p, x)?.0)
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ArchError> {
        let (attn, v_hat) = self.attend(g, p, x)?;
        let (n, c, h, w) = g.value(x).dims4()?;
        let mixed = g.matmul(v_hat, attn)?;
        let mixed = g.transpose_last2(mixed)?;
        let mixed = g.reshape(mixed, &[n, c, h, w])?;
        let out = self.out_proj.forward(g, p, mixed)?;
        Ok(g.add(out, x)?)
    }

    pub fn costs(&self) -> Vec<LayerCost> {
        let mut v: Vec<LayerCost> = [&self.q_proj, &self.q_dw, &self.k_proj, &self.k_dw, &self.v_proj, &self.v_dw]
            .iter()
            .map(|c| c.cost(Resolution::Low))
            .collect();
        v.push(LayerCost::ChannelAttention { channels: self.channels, heads: self.heads });
        v.push(self.out_proj.cost(Resolution::Low));
        v
    }
}
