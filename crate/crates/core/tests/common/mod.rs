//! Independent reference implementations used as test oracles. None of this
//! code calls into the kernels it is checking.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scet_core::arch::{ArchError, ParamRegistry};
use scet_core::imaging::synth::synthetic_image;
use scet_core::imaging::{bicubic_downscale, bicubic_upscale, ImageF, ImageU8};
use scet_core::tensor::{grad_check, Graph, Tensor, TensorError, Var};

pub fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Overwrites every parameter with uniform noise so that biases, norm
/// affines and temperatures are all exercised.
pub fn randomize(reg: &mut ParamRegistry<f64>, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, p) in reg.iter_mut() {
        for v in p.value.data_mut() {
            *v = if name.ends_with("temperature") {
                rng.gen_range(0.5..1.5)
            } else if name.ends_with("gamma") {
                1.0 + rng.gen_range(-0.3..0.3)
            } else {
                rng.gen_range(-scale..scale)
            };
        }
    }
}

/// Scalar readout with a fixed random weighting of every output element.
pub fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var, TensorError> {
    let r = g.constant(random(g.value(y).shape(), seed));
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

fn param<'a>(reg: &'a ParamRegistry<f64>, name: &str) -> &'a [f64] {
    reg.by_name(name).unwrap_or_else(|| panic!("missing {name}")).value.data()
}

/// `planes[c][p]`, one vector per channel.
pub type Planes = Vec<Vec<f64>>;

pub fn planes(x: &Tensor<f64>) -> (Planes, usize, usize) {
    let (n, c, h, w) = x.dims4().unwrap();
    assert_eq!(n, 1);
    ((0..c).map(|ch| x.data()[ch * h * w..(ch + 1) * h * w].to_vec()).collect(), h, w)
}

pub fn dense_layer_norm(x: &Planes, gamma: &[f64], beta: &[f64], eps: f64) -> Planes {
    let c = x.len();
    let npix = x[0].len();
    let mut out = vec![vec![0.0; npix]; c];
    for p in 0..npix {
        let mean = (0..c).map(|i| x[i][p]).sum::<f64>() / c as f64;
        let var = (0..c).map(|i| (x[i][p] - mean).powi(2)).sum::<f64>() / c as f64;
        for i in 0..c {
            out[i][p] = (x[i][p] - mean) / (var + eps).sqrt() * gamma[i] + beta[i];
        }
    }
    out
}

pub fn dense_pointwise(x: &Planes, w: &[f64], b: &[f64], cout: usize) -> Planes {
    let cin = x.len();
    let npix = x[0].len();
    (0..cout)
        .map(|o| (0..npix).map(|p| b[o] + (0..cin).map(|i| w[o * cin + i] * x[i][p]).sum::<f64>()).collect())
        .collect()
}

pub fn dense_depthwise3(x: &Planes, w: &[f64], b: &[f64], h: usize, wd: usize) -> Planes {
    x.iter()
        .enumerate()
        .map(|(c, plane)| {
            let mut out = vec![0.0; h * wd];
            for y in 0..h as isize {
                for xx in 0..wd as isize {
                    let mut acc = b[c];
                    for ky in 0..3isize {
                        for kx in 0..3isize {
                            let (iy, ix) = (y + ky - 1, xx + kx - 1);
                            if iy >= 0 && ix >= 0 && iy < h as isize && ix < wd as isize {
                                acc += w[c * 9 + (ky * 3 + kx) as usize] * plane[(iy * wd as isize + ix) as usize];
                            }
                        }
                    }
                    out[(y * wd as isize + xx) as usize] = acc;
                }
            }
            out
        })
        .collect()
}

/// Transposed channel attention written out with explicit loops.
pub fn dense_mdta(reg: &ParamRegistry<f64>, prefix: &str, heads: usize, eps: f64, x: &Tensor<f64>) -> Tensor<f64> {
    let (xp, h, w) = planes(x);
    let c = xp.len();
    let cph = c / heads;
    let npix = h * w;
    let name = |s: &str| format!("{prefix}.{s}");
    let ln = dense_layer_norm(&xp, param(reg, &name("norm.gamma")), param(reg, &name("norm.beta")), eps);
    let branch = |proj: &str, dw: &str| {
        let y = dense_pointwise(&ln, param(reg, &name(&format!("{proj}.weight"))), param(reg, &name(&format!("{proj}.bias"))), c);
        dense_depthwise3(&y, param(reg, &name(&format!("{dw}.weight"))), param(reg, &name(&format!("{dw}.bias"))), h, w)
    };
    let q = branch("q_proj", "q_dw");
    let k = branch("k_proj", "k_dw");
    let v = branch("v_proj", "v_dw");
    let alpha = param(reg, &name("temperature"));
    let mut mixed = vec![vec![0.0; npix]; c];
    for hd in 0..heads {
        let base = hd * cph;
        let mut s = vec![vec![0.0; cph]; cph];
        for i in 0..cph {
            for j in 0..cph {
                s[i][j] = (0..npix).map(|p| k[base + i][p] * q[base + j][p]).sum::<f64>() / alpha[hd];
            }
            let mx = s[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s[i].iter().map(|v| (v - mx).exp()).sum();
            for j in 0..cph {
                s[i][j] = (s[i][j] - mx).exp() / z;
            }
        }
        for p in 0..npix {
            for j in 0..cph {
                mixed[base + j][p] = (0..cph).map(|i| v[base + i][p] * s[i][j]).sum();
            }
        }
    }
    let out = dense_pointwise(&mixed, param(reg, &name("out_proj.weight")), param(reg, &name("out_proj.bias")), c);
    let data = (0..c).flat_map(|o| (0..npix).map(move |p| (o, p))).map(|(o, p)| out[o][p] + xp[o][p]).collect();
    Tensor::new(&[1, c, h, w], data).unwrap()
}

/// Acceptance bound on the normalized gradient error, and the finite-difference step.
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_EPS: f64 = 1e-5;

/// Gradient check over every parameter of `reg` and the input `x`.
pub fn registry_grad_check<F>(reg: &ParamRegistry<f64>, x: &Tensor<f64>, f: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var], Var) -> Result<Var, ArchError>,
{
    let mut inputs: Vec<Tensor<f64>> = reg.iter().map(|(_, p)| p.value.clone()).collect();
    inputs.push(x.clone());
    grad_check(
        |g, vars| {
            let (params, input) = vars.split_at(vars.len() - 1);
            let y = f(g, params, input[0]).map_err(|e| match e {
                ArchError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            project(g, y, 99)
        },
        &inputs,
        GRAD_EPS,
    )
    .unwrap()
}

// ---- imaging oracles ------------------------------------------------------

/// Keys kernel in its general-`a` form.
pub fn keys(x: f64, a: f64) -> f64 {
    let t = x.abs();
    if t < 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Direct 2-D weighted sum over every source pixel within reach.
pub fn resize_oracle(img: &ImageF, oh: usize, ow: usize) -> ImageF {
    let (h, w) = (img.height() as f64, img.width() as f64);
    let (sy, sx) = (oh as f64 / h, ow as f64 / w);
    let axis_weight = |s: f64, d: f64| if s < 1.0 { s * keys(s * d, -0.5) } else { keys(d, -0.5) };
    ImageF::from_fn(img.channels(), oh, ow, |c, oy, ox| {
        // pixel centres: output i (0-based) sits at source (i + 0.5) / s - 0.5
        let uy = (oy as f64 + 0.5) / sy - 0.5;
        let ux = (ox as f64 + 0.5) / sx - 0.5;
        let (mut acc, mut norm) = (0.0, 0.0);
        for iy in -20i64..(h as i64 + 20) {
            let wy = axis_weight(sy, uy - iy as f64);
            if wy == 0.0 {
                continue;
            }
            for ix in -20i64..(w as i64 + 20) {
                let wx = axis_weight(sx, ux - ix as f64);
                if wx == 0.0 {
                    continue;
                }
                let py = iy.clamp(0, h as i64 - 1) as usize;
                let px = ix.clamp(0, w as i64 - 1) as usize;
                acc += wy * wx * img.at(c, py, px);
                norm += wy * wx;
            }
        }
        (acc / norm).clamp(0.0, 1.0)
    })
}

pub fn y_oracle(p: [u8; 3]) -> f64 {
    let [r, g, b] = p.map(|v| v as f64 / 255.0);
    16.0 + 65.481 * r + 128.553 * g + 24.966 * b
}

pub fn psnr_oracle(a: &ImageU8, b: &ImageU8, shave: usize) -> f64 {
    let (mut se, mut n) = (0.0, 0.0);
    for y in shave..a.height() - shave {
        for x in shave..a.width() - shave {
            let d = y_oracle(a.pixel(y, x)) - y_oracle(b.pixel(y, x));
            se += d * d;
            n += 1.0;
        }
    }
    if se == 0.0 {
        100.0
    } else {
        10.0 * (255.0f64 * 255.0 / (se / n)).log10()
    }
}

/// Windowed statistics per 11×11 block with a 2-D Gaussian and two-pass moments.
pub fn ssim_oracle(a: &ImageU8, b: &ImageU8, shave: usize) -> f64 {
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (h, w) = (a.height() - 2 * shave, a.width() - 2 * shave);
    let ya = |y: usize, x: usize| y_oracle(a.pixel(y + shave, x + shave));
    let yb = |y: usize, x: usize| y_oracle(b.pixel(y + shave, x + shave));
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (mut sum, mut count) = (0.0, 0.0);
    for top in 0..=h - 11 {
        for left in 0..=w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / total;
                    ma += k * ya(top + i, left + j);
                    mb += k * yb(top + i, left + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / total;
                    let (da, db) = (ya(top + i, left + j) - ma, yb(top + i, left + j) - mb);
                    va += k * da * da;
                    vb += k * db * db;
                    cov += k * da * db;
                }
            }
            sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    sum / count
}

pub fn noisy(img: &ImageU8, amp: i32, seed: u64) -> ImageU8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img.data().iter().map(|&v| (v as i32 + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8).collect();
    ImageU8::new(img.height(), img.width(), data).unwrap()
}

pub fn blurred(img: &ImageU8) -> ImageU8 {
    let lr = bicubic_downscale(&img.to_f(), 2).unwrap();
    bicubic_upscale(&lr, 2).unwrap().to_u8().unwrap()
}

pub fn fixed_images() -> Vec<ImageU8> {
    vec![synthetic_image(64, 64, 1), synthetic_image(64, 64, 2), noisy(&synthetic_image(64, 64, 3), 30, 4)]
}
