//! Separable bicubic resampling with the Keys kernel (a = -0.5), widened on
//! downscale for antialiasing. Source coordinates outside the image are
//! clamped to the border.

use super::{ImageF, ImagingError};

/// Keys cubic convolution kernel with a = -0.5.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Source taps of one output sample: `(source index, weight)`; weights sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Contribution {
    pub taps: Vec<(usize, f64)>,
}

/// Tap tables for resampling a line of `in_len` samples to `out_len`.
pub fn contributions(in_len: usize, out_len: usize) -> Vec<Contribution> {
    let scale = out_len as f64 / in_len as f64;
    let antialias = scale < 1.0;
    let kernel_width = if antialias { 4.0 / scale } else { 4.0 };
    let taps = kernel_width.ceil() as i64 + 2;
    (1..=out_len)
        .map(|x| {
            // 1-based continuous source coordinate of output sample x
            let u = x as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - kernel_width / 2.0).floor() as i64;
            let mut raw: Vec<(usize, f64)> = (0..taps)
                .filter_map(|j| {
                    let idx = left + j;
                    let d = u - idx as f64;
                    let w = if antialias { scale * cubic(scale * d) } else { cubic(d) };
                    (w != 0.0).then(|| ((idx.clamp(1, in_len as i64) - 1) as usize, w))
                })
                .collect();
            let total: f64 = raw.iter().map(|t| t.1).sum();
            for t in &mut raw {
                t.1 /= total;
            }
            Contribution { taps: raw }
        })
        .collect()
}

fn resample_rows(src: &[f64], h: usize, w: usize, table: &[Contribution]) -> Vec<f64> {
    let ow = table.len();
    let mut out = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (x, c) in table.iter().enumerate() {
            out[y * ow + x] = c.taps.iter().map(|&(i, wt)| row[i] * wt).sum();
        }
    }
    out
}

fn resample_cols(src: &[f64], w: usize, table: &[Contribution]) -> Vec<f64> {
    let oh = table.len();
    let mut out = vec![0.0; oh * w];
    for (y, c) in table.iter().enumerate() {
        let dst = &mut out[y * w..(y + 1) * w];
        for &(i, wt) in &c.taps {
            for (d, s) in dst.iter_mut().zip(&src[i * w..(i + 1) * w]) {
                *d += wt * s;
            }
        }
    }
    out
}

/// Resizes every channel to `out_h × out_w`; the result is clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageF, out_h: usize, out_w: usize) -> Result<ImageF, ImagingError> {
    if out_h == 0 || out_w == 0 || img.height() == 0 || img.width() == 0 {
        return Err(ImagingError::Invalid(format!(
            "cannot resize {}x{} to {out_h}x{out_w}",
            img.height(),
            img.width()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let rows = contributions(h, out_h);
    let cols = contributions(w, out_w);
    let mut data = Vec::with_capacity(img.channels() * out_h * out_w);
    for c in 0..img.channels() {
        let vertical = resample_cols(img.plane(c), w, &rows);
        data.extend(resample_rows(&vertical, out_h, w, &cols));
    }
    Ok(ImageF::new(img.channels(), out_h, out_w, data)?.clamped())
}

/// Bicubic degradation by an integer factor; extents must be divisible by `scale`.
pub fn bicubic_downscale(img: &ImageF, scale: usize) -> Result<ImageF, ImagingError> {
    if scale == 0 || img.height() % scale != 0 || img.width() % scale != 0 {
        return Err(ImagingError::Invalid(format!(
            "{}x{} is not divisible by scale {scale}",
            img.height(),
            img.width()
        )));
    }
    bicubic_resize(img, img.height() / scale, img.width() / scale)
}

pub fn bicubic_upscale(img: &ImageF, scale: usize) -> Result<ImageF, ImagingError> {
    bicubic_resize(img, img.height() * scale, img.width() * scale)
}
