//! PSNR and SSIM on the BT.601 Y channel in the 8-bit range.

use std::fmt::Write as _;

use super::{ImageU8, ImagingError};

/// Reported PSNR when the two images are identical.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;

/// Unrounded Y in `[16, 235]`, row-major.
pub fn y_plane_u8(img: &ImageU8) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| 16.0 + (65.481 * p[0] as f64 + 128.553 * p[1] as f64 + 24.966 * p[2] as f64) / 255.0)
        .collect()
}

fn shaved_planes(a: &ImageU8, b: &ImageU8, shave: usize) -> Result<(Vec<f64>, Vec<f64>, usize, usize), ImagingError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(ImagingError::ExtentMismatch { a: (a.height(), a.width()), b: (b.height(), b.width()) });
    }
    let (h, w) = (a.height(), a.width());
    if h <= 2 * shave || w <= 2 * shave {
        return Err(ImagingError::TooSmall { height: h, width: w, detail: format!("nothing left after shaving {shave}") });
    }
    let (oh, ow) = (h - 2 * shave, w - 2 * shave);
    let crop = |plane: Vec<f64>| {
        let mut out = Vec::with_capacity(oh * ow);
        for y in shave..h - shave {
            out.extend_from_slice(&plane[y * w + shave..y * w + w - shave]);
        }
        out
    };
    Ok((crop(y_plane_u8(a)), crop(y_plane_u8(b)), oh, ow))
}

/// PSNR in dB on the Y channel after removing `shave` pixels at every border.
pub fn psnr_y(reference: &ImageU8, test: &ImageU8, shave: usize) -> Result<f64, ImagingError> {
    let (a, b, _, _) = shaved_planes(reference, test, shave)?;
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP))
}

fn gaussian_1d() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable filtering of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|j| g[j] * plane[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully covered 11×11 Gaussian windows of the shaved Y plane.
pub fn ssim_y(reference: &ImageU8, test: &ImageU8, shave: usize) -> Result<f64, ImagingError> {
    let (a, b, h, w) = shaved_planes(reference, test, shave)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(ImagingError::TooSmall {
            height: h,
            width: w,
            detail: format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} after shaving"),
        });
    }
    let g = gaussian_1d();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&a, h, w, &g);
    let mu_b = filter_valid(&b, h, w, &g);
    let aa = filter_valid(&prod(&a, &a), h, w, &g);
    let bb = filter_valid(&prod(&b, &b), h, w, &g);
    let ab = filter_valid(&prod(&a, &b), h, w, &g);
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// CSV `image,psnr_db,ssim` with a trailing `mean` row.
pub fn render_metric_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("image,psnr_db,ssim\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.6},{:.6}", r.image, r.psnr_db, r.ssim);
    }
    let n = rows.len().max(1) as f64;
    let mp = rows.iter().map(|r| r.psnr_db).sum::<f64>() / n;
    let ms = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
    let _ = writeln!(s, "mean,{mp:.6},{ms:.6}");
    s
}
