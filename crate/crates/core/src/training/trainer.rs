use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{save_checkpoint, ScetModel};
use crate::tensor::{FlushDenormals, Graph};

use super::{adam_step, adjusted_patch, augment, cosine_lr, sample_patch, stack_batch, AdamState, Dataset, TrainConfig, TrainError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEntry {
    /// 1-based iteration index.
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub losses: Vec<LossEntry>,
    /// Patch side actually used after divisibility and dataset-size adjustment.
    pub gt_patch: usize,
    pub checkpoints: Vec<PathBuf>,
}

pub fn render_loss_csv(entries: &[LossEntry]) -> String {
    let mut s = String::from("iter,lr,loss\n");
    for e in entries {
        let _ = writeln!(s, "{},{:e},{:.8}", e.iter, e.lr, e.loss);
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), TrainError> {
    fs::write(path, contents).map_err(|source| TrainError::Io { path: path.display().to_string(), source })
}

/// Runs `cfg.total_iters` steps of sample, augment, forward, L1, backward and
/// Adam under a cosine schedule. With `out_dir` set, periodic checkpoints,
/// `final.scet` and `loss.csv` are written there.
pub fn train_loop(
    model: &mut ScetModel<f32>,
    data: &Dataset,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    if model.config() != &cfg.model {
        return Err(TrainError::Config("model architecture differs from the training config".into()));
    }
    if data.is_empty() {
        return Err(TrainError::EmptyDataset("<in-memory>".into()));
    }
    let s = cfg.scale();
    let patch = cfg.gt_patch.min(adjusted_patch(data.min_side(), s));
    if patch / s < 8 {
        return Err(TrainError::Config(format!("dataset images ({} px) are too small for scale {s}", data.min_side())));
    }
    if patch < cfg.gt_patch {
        warn!("training patch reduced from {} to {patch} to fit the smallest image", cfg.gt_patch);
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|source| TrainError::Io { path: dir.display().to_string(), source })?;
    }

    let _ftz = FlushDenormals::enable();
    let adam = cfg.adam();
    let mut state = AdamState::new(model.registry());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.total_iters);
    let mut checkpoints = Vec::new();

    for it in 0..cfg.total_iters {
        let lr = cosine_lr(it, cfg.total_iters, cfg.lr0, cfg.lr_min);
        let mut pairs = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let k = rng.gen_range(0..data.len());
            let pair = sample_patch(&data.hr[k], &data.lr[k], patch, s, &mut rng)?;
            pairs.push(if cfg.augment { augment(&pair, &mut rng).0 } else { pair });
        }
        let lr_batch = stack_batch::<f32>(&pairs.iter().map(|p| &p.lr).collect::<Vec<_>>())?;
        let hr_batch = stack_batch::<f32>(&pairs.iter().map(|p| &p.hr).collect::<Vec<_>>())?;

        let mut g = Graph::new();
        let vars = model.registry().bind(&mut g);
        let x = g.constant(lr_batch);
        let y = model.forward(&mut g, &vars, x)?;
        let target = g.constant(hr_batch);
        let loss_var = g.l1_loss(y, target)?;
        let loss = g.value(loss_var).data()[0] as f64;
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { iter: it + 1, loss });
        }
        g.backward(loss_var)?;
        let reg = model.registry_mut();
        reg.zero_grad();
        reg.accumulate_grads(&g, &vars);
        adam_step(reg, &mut state, lr, &adam)?;
        losses.push(LossEntry { iter: it + 1, lr, loss });

        if cfg.log_every > 0 && (it + 1) % cfg.log_every == 0 {
            let window = &losses[losses.len().saturating_sub(cfg.log_every)..];
            let mean = window.iter().map(|e| e.loss).sum::<f64>() / window.len() as f64;
            info!("iter {:>7}  lr {lr:.3e}  loss {loss:.6}  mean {mean:.6}", it + 1);
        }
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.total_iters {
                let path = dir.join(format!("checkpoint_{:07}.scet", it + 1));
                save_checkpoint(model, &path)?;
                write(&dir.join("loss.csv"), &render_loss_csv(&losses))?;
                checkpoints.push(path);
            }
        }
    }

    if let Some(dir) = out_dir {
        let path = dir.join("final.scet");
        save_checkpoint(model, &path)?;
        write(&dir.join("loss.csv"), &render_loss_csv(&losses))?;
        checkpoints.push(path);
    }
    Ok(TrainOutcome { losses, gt_patch: patch, checkpoints })
}
