use std::path::{Path, PathBuf};

use rand::Rng;

use crate::imaging::{bicubic_downscale, list_pngs, load_png, ImageF, ImagingError};
use crate::tensor::{Real, Tensor};

use super::TrainError;

/// Aligned LR/HR crops, both 3-channel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub lr: ImageF,
    pub hr: ImageF,
}

/// HR images with matching LR counterparts.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub names: Vec<String>,
    pub hr: Vec<ImageF>,
    pub lr: Vec<ImageF>,
}

// LR is stored at 8 bits, as a degraded PNG would be.
fn degrade_u8(hr: &ImageF, scale: usize) -> Result<ImageF, ImagingError> {
    Ok(bicubic_downscale(hr, scale)?.to_u8()?.to_f())
}

impl Dataset {
    /// Loads every PNG of `hr_dir`. HR images are centre-cropped to
    /// scale-divisible extents; LR comes from `lr_dir` when given, else from
    /// bicubic degradation.
    pub fn load(hr_dir: &Path, scale: usize, lr_dir: Option<&Path>) -> Result<Self, TrainError> {
        let paths = list_pngs(hr_dir)?;
        if paths.is_empty() {
            return Err(TrainError::EmptyDataset(hr_dir.display().to_string()));
        }
        let mut names = Vec::with_capacity(paths.len());
        let mut hrs = Vec::with_capacity(paths.len());
        for p in &paths {
            let img = load_png(p)?;
            let (h, w) = (img.height() - img.height() % scale, img.width() - img.width() % scale);
            names.push(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
            hrs.push(img.center_crop(h, w)?.to_f());
        }
        let lrs = match lr_dir {
            Some(dir) => names
                .iter()
                .zip(&hrs)
                .map(|(n, hr)| {
                    let path: PathBuf = dir.join(n);
                    let lr = load_png(&path)?.to_f();
                    if lr.height() * scale != hr.height() || lr.width() * scale != hr.width() {
                        return Err(ImagingError::Invalid(format!(
                            "{}: LR {}x{} does not match HR {}x{} at scale {scale}",
                            path.display(),
                            lr.height(),
                            lr.width(),
                            hr.height(),
                            hr.width()
                        )));
                    }
                    Ok(lr)
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => hrs.iter().map(|hr| degrade_u8(hr, scale)).collect::<Result<Vec<_>, _>>()?,
        };
        Ok(Dataset { names, hr: hrs, lr: lrs })
    }

    pub fn from_images(names: Vec<String>, hr: Vec<ImageF>, scale: usize) -> Result<Self, TrainError> {
        let lr = hr.iter().map(|h| degrade_u8(h, scale)).collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset { names, hr, lr })
    }

    pub fn len(&self) -> usize {
        self.hr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hr.is_empty()
    }

    /// Smallest HR side across the dataset.
    pub fn min_side(&self) -> usize {
        self.hr.iter().map(|i| i.height().min(i.width())).min().unwrap_or(0)
    }
}

/// Uniform random aligned crop; the HR origin is a multiple of `scale`.
pub fn sample_patch<R: Rng>(
    hr: &ImageF,
    lr: &ImageF,
    gt_patch: usize,
    scale: usize,
    rng: &mut R,
) -> Result<SamplePair, TrainError> {
    if gt_patch % scale != 0 {
        return Err(TrainError::Config(format!("patch {gt_patch} is not divisible by scale {scale}")));
    }
    if lr.height() * scale != hr.height() || lr.width() * scale != hr.width() {
        return Err(TrainError::Config(format!(
            "LR {}x{} is not HR {}x{} / {scale}",
            lr.height(),
            lr.width(),
            hr.height(),
            hr.width()
        )));
    }
    if hr.height() < gt_patch || hr.width() < gt_patch {
        return Err(ImagingError::TooSmall {
            height: hr.height(),
            width: hr.width(),
            detail: format!("smaller than the {gt_patch}x{gt_patch} training patch"),
        }
        .into());
    }
    let lp = gt_patch / scale;
    let top = rng.gen_range(0..=lr.height() - lp);
    let left = rng.gen_range(0..=lr.width() - lp);
    Ok(SamplePair {
        lr: lr.crop(top, left, lp, lp)?,
        hr: hr.crop(top * scale, left * scale, gt_patch, gt_patch)?,
    })
}

/// One of the eight symmetries of the square: an optional horizontal flip
/// followed by `rotation` counter-clockwise quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub flip: bool,
    pub rotation: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { flip: false, rotation: 0 };

    pub fn all() -> impl Iterator<Item = Dihedral> {
        (0..8u8).map(|k| Dihedral { flip: k >= 4, rotation: k % 4 })
    }

    pub fn inverse(self) -> Dihedral {
        if self.flip {
            self
        } else {
            Dihedral { flip: false, rotation: (4 - self.rotation) % 4 }
        }
    }

    pub fn apply(self, img: &ImageF) -> ImageF {
        let (h, w) = (img.height(), img.width());
        let mut out = if self.flip {
            ImageF::from_fn(img.channels(), h, w, |c, y, x| img.at(c, y, w - 1 - x))
        } else {
            img.clone()
        };
        for _ in 0..self.rotation {
            let (h, w) = (out.height(), out.width());
            out = ImageF::from_fn(out.channels(), w, h, |c, y, x| out.at(c, x, w - 1 - y));
        }
        out
    }

    pub fn apply_pair(self, pair: &SamplePair) -> SamplePair {
        SamplePair { lr: self.apply(&pair.lr), hr: self.apply(&pair.hr) }
    }
}

/// Applies a uniformly drawn dihedral transform to both images.
pub fn augment<R: Rng>(pair: &SamplePair, rng: &mut R) -> (SamplePair, Dihedral) {
    let k: u8 = rng.gen_range(0..8);
    let t = Dihedral { flip: k >= 4, rotation: k % 4 };
    (t.apply_pair(pair), t)
}

/// Stacks equally sized images into `[N, C, H, W]`.
pub fn stack_batch<T: Real>(images: &[&ImageF]) -> Result<Tensor<T>, TrainError> {
    let first = images.first().ok_or_else(|| TrainError::Config("empty batch".into()))?;
    let (c, h, w) = (first.channels(), first.height(), first.width());
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if (img.channels(), img.height(), img.width()) != (c, h, w) {
            return Err(TrainError::Config("batch images differ in extent".into()));
        }
        data.extend(img.data().iter().map(|&v| T::lit(v)));
    }
    Ok(Tensor::new(&[images.len(), c, h, w], data)?)
}
