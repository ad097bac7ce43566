//! Image containers, PNG I/O, bicubic degradation and Y-channel metrics.

mod io;
mod metrics;
mod resize;
pub mod synth;

use thiserror::Error;

use crate::tensor::{Real, Tensor};

pub use io::{list_pngs, load_png, save_png};
pub use metrics::{psnr_y, render_metric_csv, ssim_y, y_plane_u8, MetricRow, PSNR_CAP};
pub use resize::{bicubic_downscale, bicubic_resize, bicubic_upscale, cubic, Contribution, contributions};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot decode {path}: {detail}")]
    Decode { path: String, detail: String },
    #[error("{path}: unsupported sample depth of {bits} bits (8-bit PNG required)")]
    UnsupportedDepth { path: String, bits: u16 },
    #[error("cannot encode {path}: {detail}")]
    Encode { path: String, detail: String },
    #[error("expected {expected} channels, got {got}")]
    Channels { expected: usize, got: usize },
    #[error("image extents differ: {a:?} vs {b:?}")]
    ExtentMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("image of {height}x{width} is too small: {detail}")]
    TooSmall { height: usize, width: usize, detail: String },
    #[error("invalid image: {0}")]
    Invalid(String),
}

/// 8-bit sRGB image, interleaved RGB, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if data.len() != height * width * 3 {
            return Err(ImagingError::Invalid(format!(
                "{} samples for a {height}x{width} RGB image",
                data.len()
            )));
        }
        Ok(ImageU8 { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        ImageU8 { height, width, data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        ImageU8 { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Samples scaled to `[0, 1]`.
    pub fn to_f(&self) -> ImageF {
        let plane = self.height * self.width;
        let mut data = vec![0.0; plane * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px[c] as f64 / 255.0;
            }
        }
        ImageF { height: self.height, width: self.width, channels: 3, data }
    }

    /// Center crop to `height × width`.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<ImageU8, ImagingError> {
        if height > self.height || width > self.width || height == 0 || width == 0 {
            return Err(ImagingError::TooSmall {
                height: self.height,
                width: self.width,
                detail: format!("cannot crop to {height}x{width}"),
            });
        }
        let (top, left) = ((self.height - height) / 2, (self.width - width) / 2);
        Ok(ImageU8::from_fn(height, width, |y, x| self.pixel(top + y, left + x)))
    }
}

/// Real-valued image stored planar (channel-major), samples nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageF {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageF {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if data.len() != channels * height * width {
            return Err(ImagingError::Invalid(format!(
                "{} samples for a {channels}x{height}x{width} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::Invalid("non-finite sample".into()));
        }
        Ok(ImageF { height, width, channels, data })
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        ImageF { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn clamped(mut self) -> ImageF {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Rounds to 8 bits after clamping; requires three channels.
    pub fn to_u8(&self) -> Result<ImageU8, ImagingError> {
        if self.channels != 3 {
            return Err(ImagingError::Channels { expected: 3, got: self.channels });
        }
        let plane = self.height * self.width;
        let mut data = Vec::with_capacity(plane * 3);
        for i in 0..plane {
            for c in 0..3 {
                data.push((self.data[c * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        Ok(ImageU8 { height: self.height, width: self.width, data })
    }

    /// Crop of `height × width` starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageF, ImagingError> {
        if top + height > self.height || left + width > self.width {
            return Err(ImagingError::TooSmall {
                height: self.height,
                width: self.width,
                detail: format!("crop {height}x{width} at ({top}, {left})"),
            });
        }
        Ok(ImageF::from_fn(self.channels, height, width, |c, y, x| self.at(c, top + y, left + x)))
    }

    /// Shape `[1, C, H, W]`.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::new(&[1, self.channels, self.height, self.width], self.data.iter().map(|&v| T::lit(v)).collect())
            .expect("extents match")
    }

    /// Reads batch element `n` of an NCHW tensor, clamping to `[0, 1]`.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, n: usize) -> Result<ImageF, ImagingError> {
        let (batch, c, h, w) = t.dims4().map_err(|e| ImagingError::Invalid(e.to_string()))?;
        if n >= batch {
            return Err(ImagingError::Invalid(format!("batch index {n} out of {batch}")));
        }
        let per = c * h * w;
        let data = t.data()[n * per..(n + 1) * per]
            .iter()
            .map(|v| {
                let v = v.to_f64().unwrap_or(0.0);
                if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }
            })
            .collect();
        Ok(ImageF { height: h, width: w, channels: c, data })
    }
}

/// BT.601 studio-swing luma of an RGB image in `[0, 1]`, output in `[16/255, 235/255]`.
pub fn rgb_to_ycbcr_y(img: &ImageF) -> Result<ImageF, ImagingError> {
    if img.channels != 3 {
        return Err(ImagingError::Channels { expected: 3, got: img.channels });
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..r.len()).map(|i| (16.0 + 65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i]) / 255.0).collect();
    Ok(ImageF { height: img.height, width: img.width, channels: 1, data })
}
