use super::ArchError;

/// Hyperparameters of an SCET network.
#[derive(Clone, Debug, PartialEq)]
pub struct ScetConfig {
    /// Number of SCPA blocks in the SC module.
    pub num_blocks: usize,
    /// Feature width of the backbone.
    pub channels: usize,
    /// Upscaling factor, one of 2, 3 or 4.
    pub scale: usize,
    pub mdta_heads: usize,
    /// GDFN hidden width is `ceil(gdfn_expansion * channels)`.
    pub gdfn_expansion: f64,
    pub ln_eps: f64,
    /// When false the MDTA/GDFN stage is omitted (the SCPA-only baseline).
    pub transformer: bool,
}

impl Default for ScetConfig {
    fn default() -> Self {
        Self {
            num_blocks: 16,
            channels: 64,
            scale: 4,
            mdta_heads: 1,
            gdfn_expansion: 2.66,
            ln_eps: 1e-6,
            transformer: true,
        }
    }
}

impl ScetConfig {
    pub fn new(num_blocks: usize, channels: usize, scale: usize) -> Self {
        Self { num_blocks, channels, scale, ..Self::default() }
    }

    pub fn without_transformer(mut self) -> Self {
        self.transformer = false;
        self
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let bad = |msg: String| Err(ArchError::InvalidConfig(msg));
        if self.num_blocks == 0 {
            return bad("num_blocks must be at least 1".into());
        }
        if self.channels < 2 || self.channels % 2 != 0 {
            return bad(format!("channels must be even and >= 2, got {}", self.channels));
        }
        if !(2..=4).contains(&self.scale) {
            return bad(format!("scale must be 2, 3 or 4, got {}", self.scale));
        }
        if self.mdta_heads == 0 || self.channels % self.mdta_heads != 0 {
            return bad(format!(
                "channels {} not divisible by mdta_heads {}",
                self.channels, self.mdta_heads
            ));
        }
        if !(self.gdfn_expansion > 0.0 && self.gdfn_expansion.is_finite()) {
            return bad(format!("gdfn_expansion must be positive, got {}", self.gdfn_expansion));
        }
        if !(self.ln_eps > 0.0) {
            return bad(format!("ln_eps must be positive, got {}", self.ln_eps));
        }
        Ok(())
    }

    pub fn gdfn_hidden(&self) -> usize {
        // 1e-9 keeps products like 2.5 * 64 from rounding up to 161
        (self.gdfn_expansion * self.channels as f64 - 1e-9).ceil().max(1.0) as usize
    }

    /// Channel count carried at HR resolution inside the backbone upsampler.
    pub fn hr_channels(&self) -> usize {
        (self.channels / 16).max(1)
    }
}
