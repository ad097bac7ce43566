use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::gdfn::GdfnLayer;
use super::layers::{Conv, LayerCost, Resolution};
use super::mdta::MdtaLayer;
use super::scpa::ScpaBlock;
use super::upsample::{BackboneUpsampler, ResidualUpsampler};
use super::{ArchError, ParamRegistry, ScetConfig};
use crate::tensor::{Graph, Real, Tensor, Var};

/// MDTA followed by GDFN.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficientTransformer {
    pub mdta: MdtaLayer,
    pub gdfn: GdfnLayer,
}

/// Layer structure of an SCET network; parameter values live in the registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScetLayout {
    pub head: Conv,
    pub blocks: Vec<ScpaBlock>,
    pub transformer: Option<EfficientTransformer>,
    pub up_backbone: BackboneUpsampler,
    pub up_residual: ResidualUpsampler,
}

/// Full network: shallow 3×3 conv, SC module, efficient transformer, and two
/// upsampling paths whose outputs are summed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScetModel<T> {
    config: ScetConfig,
    layout: ScetLayout,
    registry: ParamRegistry<T>,
}

/// Submodule name of block `i`.
pub fn block_name(i: usize) -> String {
    format!("blocks.{i}")
}

impl<T: Real> ScetModel<T> {
    /// Builds the network with zero conv weights and identity norms; see
    /// [`init_weights`](Self::init_weights).
    pub fn new(config: ScetConfig) -> Result<Self, ArchError> {
        config.validate()?;
        let mut reg = ParamRegistry::new();
        let w = config.channels;
        let head = Conv::new(&mut reg, "head", 3, w, 3, 1)?;
        let blocks = (0..config.num_blocks)
            .map(|i| ScpaBlock::new(&mut reg, &block_name(i), w))
            .collect::<Result<Vec<_>, _>>()?;
        let transformer = if config.transformer {
            Some(EfficientTransformer {
                mdta: MdtaLayer::new(&mut reg, "mdta", w, config.mdta_heads, config.ln_eps)?,
                gdfn: GdfnLayer::new(&mut reg, "gdfn", w, config.gdfn_hidden(), config.ln_eps)?,
            })
        } else {
            None
        };
        let up_backbone = BackboneUpsampler::new(&mut reg, "up_backbone", w, config.hr_channels(), config.scale)?;
        let up_residual = ResidualUpsampler::new(&mut reg, "up_residual", w, config.scale)?;
        Ok(Self {
            config,
            layout: ScetLayout { head, blocks, transformer, up_backbone, up_residual },
            registry: reg,
        })
    }

    /// [`new`](Self::new) followed by [`init_weights`](Self::init_weights).
    pub fn initialized(config: ScetConfig, seed: u64) -> Result<Self, ArchError> {
        let mut m = Self::new(config)?;
        m.init_weights(seed);
        Ok(m)
    }

    pub fn config(&self) -> &ScetConfig {
        &self.config
    }

    pub fn layout(&self) -> &ScetLayout {
        &self.layout
    }

    pub fn registry(&self) -> &ParamRegistry<T> {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut ParamRegistry<T> {
        &mut self.registry
    }

    pub fn num_params(&self) -> usize {
        self.registry.numel()
    }

    /// He-normal conv weights (`std = sqrt(2 / fan_in)`), zero biases, unit
    /// norm gains, zero norm shifts and unit attention temperatures.
    /// Samples are drawn in registry order from a seeded ChaCha stream.
    /// He-normal conv weights (`std = sqrt(2 / fan_in)`), zero biases and
    /// LN shifts, unit LN gains and attention temperatures.
    pub fn init_weights(&mut self, seed: u64) {
        self.init_weights_scaled(seed, 1.0);
    }

    /// [`Self::init_weights`] with every conv weight multiplied by `gain`.
    pub fn init_weights_scaled(&mut self, seed: u64, gain: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, p) in self.registry.iter_mut() {
            p.grad = None;
            let value = &mut p.value;
            if name.ends_with(".weight") {
                let s = value.shape();
                let fan_in = (s[1] * s[2] * s[3]) as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
                for v in value.data_mut() {
                    *v = T::lit(gain * normal.sample(&mut rng));
                }
            } else if name.ends_with(".gamma") || name.ends_with(".temperature") {
                value.data_mut().fill(T::one());
            } else {
                value.data_mut().fill(T::zero());
            }
        }
    }

    /// Records the forward pass on `g` with parameters bound as `params`
    /// (one var per registry entry, in order).
    pub fn forward(&self, g: &mut Graph<T>, params: &[Var], input: Var) -> Result<Var, ArchError> {
        let shape = g.value(input).shape().to_vec();
        let [_, c, h, w] = shape[..] else {
            return Err(ArchError::InvalidInput(format!("expected NCHW input, got {shape:?}")));
        };
        if c != 3 {
            return Err(ArchError::Channels { layer: "input", expected: 3, got: c });
        }
        if h < 8 || w < 8 {
            return Err(ArchError::InvalidInput(format!("input {h}x{w} smaller than 8x8")));
        }
        let l = &self.layout;
        let shallow = l.head.forward(g, params, input)?;
        let deep = self.sc_module(g, params, shallow)?;
        let deep = match &l.transformer {
            Some(t) => {
                let y = t.mdta.forward(g, params, deep)?;
                t.gdfn.forward(g, params, y)?
            }
            None => deep,
        };
        let up = l.up_backbone.forward(g, params, deep)?;
        let skip = l.up_residual.forward(g, params, shallow)?;
        Ok(g.add(up, skip)?)
    }

    /// The cascade of SCPA blocks.
    pub fn sc_module(&self, g: &mut Graph<T>, params: &[Var], x: Var) -> Result<Var, ArchError> {
        self.layout.blocks.iter().try_fold(x, |f, b| b.forward(g, params, f))
    }

    /// Inference on a plain tensor, without gradient tracking.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, ArchError> {
        let mut g = Graph::new();
        let params = self.registry.bind_frozen(&mut g);
        let x = g.constant(input.clone());
        let y = self.forward(&mut g, &params, x)?;
        Ok(g.value(y).clone())
    }

    /// Submodules in registry order with the layers each contributes to the
    /// Multi-Adds count.
    pub fn cost_layout(&self) -> Vec<(String, Vec<LayerCost>)> {
        let l = &self.layout;
        let mut rows = vec![("head".to_string(), vec![l.head.cost(Resolution::Low)])];
        rows.extend(l.blocks.iter().enumerate().map(|(i, b)| (block_name(i), b.costs())));
        if let Some(t) = &l.transformer {
            rows.push(("mdta".into(), t.mdta.costs()));
            rows.push(("gdfn".into(), t.gdfn.costs()));
        }
        rows.push(("up_backbone".into(), l.up_backbone.costs()));
        rows.push(("up_residual".into(), l.up_residual.costs()));
        rows
    }

    pub fn cast<U: Real>(&self) -> ScetModel<U> {
        ScetModel { config: self.config.clone(), layout: self.layout.clone(), registry: self.registry.cast() }
    }
}
