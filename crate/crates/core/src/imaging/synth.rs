//! Procedural test images: smooth gradients overlaid with hard-edged shapes
//! and stripe patches. Deterministic per seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ImageU8;

enum Shape {
    Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
    Disc { cy: f64, cx: f64, r: f64 },
    Stripes { cy: f64, cx: f64, r: f64, angle: f64, period: f64 },
}

impl Shape {
    fn covers(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Rect { y0, x0, y1, x1 } => y >= y0 && y < y1 && x >= x0 && x < x1,
            Shape::Disc { cy, cx, r } => (y - cy).powi(2) + (x - cx).powi(2) <= r * r,
            Shape::Stripes { cy, cx, r, angle, period } => {
                let (dy, dx) = (y - cy, x - cx);
                if dy.abs() > r || dx.abs() > r {
                    return false;
                }
                let t = dy * angle.sin() + dx * angle.cos();
                (t / period).rem_euclid(1.0) < 0.5
            }
        }
    }
}

fn color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

/// Renders one `height × width` image with 2×2 supersampled shape edges.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> ImageU8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let top = color(&mut rng);
    let bottom = color(&mut rng);
    let tilt: f64 = rng.gen_range(-0.5..0.5);
    let wave_freq = rng.gen_range(0.02..0.12);
    let wave_amp = rng.gen_range(0.0..0.08);

    let count = rng.gen_range(6..14);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let cy = rng.gen_range(0.0..h);
        let cx = rng.gen_range(0.0..w);
        let r = rng.gen_range(0.06..0.3) * h.min(w);
        let shape = match rng.gen_range(0..3) {
            0 => Shape::Rect { y0: cy - r, x0: cx - r * rng.gen_range(0.4..1.6), y1: cy + r, x1: cx + r },
            1 => Shape::Disc { cy, cx, r },
            _ => Shape::Stripes { cy, cx, r, angle: rng.gen_range(0.0..std::f64::consts::PI), period: rng.gen_range(3.0..9.0) },
        };
        shapes.push((shape, color(&mut rng)));
    }

    ImageU8::from_fn(height, width, |y, x| {
        let mut acc = [0.0; 3];
        for (sy, sx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
            let (fy, fx) = (y as f64 + sy, x as f64 + sx);
            let t = ((fy / h) + tilt * (fx / w - 0.5)).clamp(0.0, 1.0);
            let wave = wave_amp * (wave_freq * (fx + 0.7 * fy)).sin();
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = top[c] * (1.0 - t) + bottom[c] * t + wave;
            }
            for (shape, col) in &shapes {
                if shape.covers(fy, fx) {
                    px = *col;
                }
            }
            for c in 0..3 {
                acc[c] += px[c] / 4.0;
            }
        }
        acc.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
    })
}
