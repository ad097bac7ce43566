//! Degrade → super-resolve → score, shared by evaluation and the CLI.

use thiserror::Error;

use crate::arch::{ArchError, ScetModel};
use crate::imaging::{bicubic_downscale, bicubic_upscale, psnr_y, ssim_y, ImageF, ImageU8, ImagingError, MetricRow};
use crate::tensor::FlushDenormals;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("model produced non-finite output")]
    NonFinite,
}

/// How the SR image of an evaluation is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrSource {
    Model,
    /// Bicubic upscaling of the LR image.
    Bicubic,
    /// The HR image itself (protocol check; scores hit the PSNR cap).
    Bypass,
}

/// Largest scale-divisible extents, and whether they differ from the input.
pub fn divisible_extent(height: usize, width: usize, scale: usize) -> (usize, usize, bool) {
    let (h, w) = (height - height % scale, width - width % scale);
    (h, w, (h, w) != (height, width))
}

/// Centre-crops `hr` to scale-divisible extents and degrades it to an 8-bit LR image.
pub fn degrade(hr: &ImageU8, scale: usize) -> Result<(ImageU8, ImageU8), ImagingError> {
    let (h, w, _) = divisible_extent(hr.height(), hr.width(), scale);
    let hr = hr.center_crop(h, w)?;
    let lr = bicubic_downscale(&hr.to_f(), scale)?.to_u8()?;
    Ok((hr, lr))
}

/// Runs the network on an 8-bit LR image; output is clamped and rounded.
pub fn super_resolve(model: &ScetModel<f32>, lr: &ImageU8) -> Result<ImageU8, PipelineError> {
    let _ftz = FlushDenormals::enable();
    let out = model.infer(&lr.to_f().to_tensor::<f32>())?;
    if !out.is_finite() {
        return Err(PipelineError::NonFinite);
    }
    Ok(ImageF::from_tensor(&out, 0)?.to_u8()?)
}

pub fn bicubic_baseline(lr: &ImageU8, scale: usize) -> Result<ImageU8, ImagingError> {
    bicubic_upscale(&lr.to_f(), scale)?.to_u8()
}

/// Scores one HR image under the degradation protocol with `shave = scale`.
pub fn evaluate(
    model: Option<&ScetModel<f32>>,
    name: &str,
    hr: &ImageU8,
    scale: usize,
    source: SrSource,
) -> Result<MetricRow, PipelineError> {
    let (hr, lr) = degrade(hr, scale)?;
    let sr = match (source, model) {
        (SrSource::Bypass, _) => hr.clone(),
        (SrSource::Bicubic, _) => bicubic_baseline(&lr, scale)?,
        (SrSource::Model, Some(m)) => super_resolve(m, &lr)?,
        (SrSource::Model, None) => {
            return Err(ImagingError::Invalid("model evaluation requested without a model".into()).into())
        }
    };
    Ok(MetricRow { image: name.to_string(), psnr_db: psnr_y(&hr, &sr, scale)?, ssim: ssim_y(&hr, &sr, scale)? })
}
