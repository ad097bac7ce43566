use crate::arch::ParamRegistry;
use crate::tensor::{Real, Tensor};

use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: `grad += weight_decay * param` before the moment update.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// First and second moments per parameter, in registry order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Real> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(reg: &ParamRegistry<T>) -> Self {
        let m: Vec<_> = reg.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        AdamState { v: m.clone(), m, t: 0 }
    }
}

/// One Adam update with bias correction; gradients are cleared afterwards.
pub fn adam_step<T: Real>(
    reg: &mut ParamRegistry<T>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if let Some((name, _)) = reg.iter().find(|(_, p)| p.grad.is_none()) {
        return Err(TrainError::MissingGradient(name.to_string()));
    }
    if state.m.len() != reg.len() {
        return Err(TrainError::Config(format!(
            "optimizer state holds {} slots for {} parameters",
            state.m.len(),
            reg.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let c1 = T::lit(1.0 - cfg.beta1.powi(t));
    let c2 = T::lit(1.0 - cfg.beta2.powi(t));
    let (lr, eps, wd) = (T::lit(lr), T::lit(cfg.eps), T::lit(cfg.weight_decay));
    for (i, (_, p)) in reg.iter_mut().enumerate() {
        let grad = p.grad.take().expect("checked above");
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (j, w) in p.value.data_mut().iter_mut().enumerate() {
            let g = grad.data()[j] + wd * *w;
            m[j] = b1 * m[j] + one_b1 * g;
            v[j] = b2 * v[j] + one_b2 * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Cosine decay from `lr0` at `t = 0` to `lr_min` at `t = total`; clamps past the end.
pub fn cosine_lr(t: usize, total: usize, lr0: f64, lr_min: f64) -> f64 {
    if total == 0 || t >= total {
        return lr_min;
    }
    let phase = std::f64::consts::PI * t as f64 / total as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + phase.cos())
}
