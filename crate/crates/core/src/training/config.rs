use std::path::PathBuf;

use crate::arch::{ScetConfig, ScetModel};

use super::{AdamConfig, TrainError};

/// Named presets accepted by [`TrainConfig::preset`].
pub const PRESETS: &[&str] = &["full", "desk-tiny"];

/// Largest multiple of `scale` not exceeding `patch`.
pub fn adjusted_patch(patch: usize, scale: usize) -> usize {
    patch - patch % scale.max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ScetConfig,
    pub lr0: f64,
    pub lr_min: f64,
    pub total_iters: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// HR patch side; rounded down to a multiple of the scale by [`TrainConfig::validate`].
    pub gt_patch: usize,
    pub seed: u64,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub log_every: usize,
    /// Iterations between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub augment: bool,
    /// Multiplier on the He-normal conv weights when training from scratch.
    pub init_gain: f64,
    /// Optional directory of pre-degraded LR images named like the HR ones.
    pub lr_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::full(4)
    }
}

impl TrainConfig {
    /// Full-size model with the published optimisation settings.
    pub fn full(scale: usize) -> Self {
        TrainConfig {
            model: ScetConfig { scale, ..ScetConfig::default() },
            lr0: 2e-4,
            lr_min: 1e-7,
            total_iters: 1_000_000,
            weight_decay: 1e-4,
            batch_size: 16,
            gt_patch: adjusted_patch(416, scale),
            seed: 0,
            betas: (0.9, 0.999),
            adam_eps: 1e-8,
            log_every: 1000,
            checkpoint_every: 50_000,
            augment: true,
            init_gain: 1.0,
            lr_dir: None,
        }
    }

    /// Tiny model and small patches sized for a single CPU core.
    pub fn desk_tiny(scale: usize) -> Self {
        TrainConfig {
            model: ScetConfig { num_blocks: 4, channels: 32, scale, ..ScetConfig::default() },
            lr0: 5e-3,
            init_gain: 0.1,
            total_iters: 20_000,
            batch_size: 8,
            gt_patch: adjusted_patch(32 * scale, scale),
            log_every: 500,
            checkpoint_every: 5_000,
            ..TrainConfig::full(scale)
        }
    }

    pub fn preset(name: &str, scale: usize) -> Result<Self, TrainError> {
        match name {
            "full" => Ok(Self::full(scale)),
            "desk-tiny" => Ok(Self::desk_tiny(scale)),
            other => Err(TrainError::Config(format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn scale(&self) -> usize {
        self.model.scale
    }

    /// Fresh model for this config, initialized from `seed` with `init_gain`.
    pub fn fresh_model(&self) -> Result<ScetModel<f32>, TrainError> {
        let mut m = ScetModel::new(self.model.clone())?;
        m.init_weights_scaled(self.seed, self.init_gain);
        Ok(m)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { beta1: self.betas.0, beta2: self.betas.1, eps: self.adam_eps, weight_decay: self.weight_decay }
    }

    /// Checks ranges and applies the patch divisibility adjustment.
    pub fn validate(&mut self) -> Result<(), TrainError> {
        self.model.validate()?;
        let s = self.scale();
        self.gt_patch = adjusted_patch(self.gt_patch, s);
        let bad = |m: String| Err(TrainError::Config(m));
        if self.gt_patch / s < 8 {
            return bad(format!("gt_patch {} gives LR patches under 8 pixels at scale {s}", self.gt_patch));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return bad(format!("init_gain must be positive, got {}", self.init_gain));
        }
        if !(self.lr0 >= 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr0 && self.lr0.is_finite()) {
            return bad(format!("need 0 <= lr_min <= lr0, got lr_min={} lr0={}", self.lr_min, self.lr0));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) || self.adam_eps <= 0.0 || self.weight_decay < 0.0 {
            return bad("betas must lie in [0, 1), eps > 0 and weight_decay >= 0".into());
        }
        Ok(())
    }
}
