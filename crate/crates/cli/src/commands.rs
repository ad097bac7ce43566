use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use scet_core::arch::{load_checkpoint, ScetModel};
use scet_core::audit::{self, ReportFormat};
use scet_core::imaging::{list_pngs, load_png, render_metric_csv, save_png, MetricRow};
use scet_core::pipeline::{self, SrSource};
use scet_core::training::{train_loop, Dataset};

use crate::error::CliError;
use crate::settings::{self, Overrides, Resolved};
use crate::{Common, Format};

pub const DEFAULT_TRAIN_OUT: &str = "scet-run";

fn echo(command: &str, lines: &str) {
    info!("{command}: resolved configuration");
    for l in lines.lines() {
        info!("  {l}");
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn resolve(common: &Common, mut flags: Overrides) -> Result<Resolved, CliError> {
    let entries = match &common.config {
        Some(p) => settings::read_config(p)?,
        None => Vec::new(),
    };
    flags.seed = common.seed;
    flags.scale = common.scale.map(|s| s as usize);
    flags.d = common.d;
    flags.w = common.w;
    flags.no_transformer = common.no_transformer;
    settings::resolve(&entries, &flags)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn scale_matches(model: &ScetModel<f32>, requested: Option<u64>) -> Result<usize, CliError> {
    let s = model.config().scale;
    match requested {
        Some(r) if r as usize != s => {
            Err(CliError::Usage(format!("checkpoint upscales by {s} but --scale {r} was requested")))
        }
        _ => Ok(s),
    }
}

pub fn train(common: &Common, data: Option<PathBuf>, preset: Option<String>, iters: Option<usize>) -> Result<(), CliError> {
    let resolved = resolve(common, Overrides { preset, iters, data, ..Overrides::default() })?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_TRAIN_OUT));
    let rendered = settings::render(&resolved);
    echo("train", &format!("{rendered}out = {}", out.display()));
    let data_dir = resolved
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("no training data: pass --data DIR or set `data` in the config".into()))?;
    let cfg = resolved.train;
    if !data_dir.is_dir() {
        return Err(CliError::Data(format!("dataset directory {} does not exist", data_dir.display())));
    }
    let dataset = Dataset::load(&data_dir, cfg.scale(), cfg.lr_dir.as_deref())?;
    info!("loaded {} training images from {}", dataset.len(), data_dir.display());
    write_file(&out.join("config.txt"), &rendered)?;
    let mut model = cfg.fresh_model()?;
    let outcome = train_loop(&mut model, &dataset, &cfg, Some(&out))?;
    let last = outcome.losses.last().map(|e| e.loss).unwrap_or(f64::NAN);
    let final_ckpt = outcome.checkpoints.last().map(|p| p.display().to_string()).unwrap_or_default();
    println!("trained {} iterations, final loss {last:.6}, checkpoint {final_ckpt}", outcome.losses.len());
    Ok(())
}

pub fn eval(common: &Common, checkpoint: Option<&Path>, hr_dir: &Path, bypass: bool, bicubic: bool) -> Result<(), CliError> {
    let source = match (bypass, bicubic) {
        (true, _) => SrSource::Bypass,
        (_, true) => SrSource::Bicubic,
        _ => SrSource::Model,
    };
    let model = match checkpoint {
        Some(p) => Some(load_checkpoint(p)?),
        None if source == SrSource::Model => {
            return Err(CliError::Usage("eval needs --checkpoint unless --bypass or --bicubic is given".into()))
        }
        None => None,
    };
    let scale = match &model {
        Some(m) => scale_matches(m, common.scale)?,
        None => common.scale.map(|s| s as usize).unwrap_or(settings::DEFAULT_SCALE),
    };
    let threads = rayon::current_num_threads();
    echo(
        "eval",
        &format!(
            "checkpoint = {}\nhr = {}\nscale = {scale}\nsource = {source:?}\nshave = {scale}\nthreads = {threads}\nout = {}",
            checkpoint.map(|p| p.display().to_string()).unwrap_or_else(|| "-".into()),
            hr_dir.display(),
            common.out.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into()),
        ),
    );
    let paths = list_pngs(hr_dir)?;
    if paths.is_empty() {
        return Err(CliError::Data(format!("{} holds no PNG images", hr_dir.display())));
    }
    // Paths are sorted, and an indexed collect keeps that order.
    let rows = paths
        .par_iter()
        .map(|p| {
            let hr = load_png(p)?;
            Ok(pipeline::evaluate(model.as_ref(), &file_name(p), &hr, scale, source)?)
        })
        .collect::<Result<Vec<MetricRow>, CliError>>()?;
    let csv = render_metric_csv(&rows);
    if let Some(out) = &common.out {
        write_file(out, &csv)?;
        info!("wrote {}", out.display());
    }
    match common.format {
        Format::Csv => print!("{csv}"),
        Format::Text => {
            for r in &rows {
                println!("{:<32} {:>9.4} dB  SSIM {:.4}", r.image, r.psnr_db, r.ssim);
            }
            let n = rows.len() as f64;
            let psnr = rows.iter().map(|r| r.psnr_db).sum::<f64>() / n;
            let ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
            println!("{:<32} {psnr:>9.4} dB  SSIM {ssim:.4}", "mean");
        }
    }
    Ok(())
}

pub fn infer(common: &Common, checkpoint: &Path, input: &Path) -> Result<(), CliError> {
    let out = common.out.clone().ok_or_else(|| CliError::Usage("infer needs --out PNG".into()))?;
    let model = load_checkpoint(checkpoint)?;
    let scale = scale_matches(&model, common.scale)?;
    echo(
        "infer",
        &format!("checkpoint = {}\ninput = {}\nscale = {scale}\nout = {}", checkpoint.display(), input.display(), out.display()),
    );
    let lr = load_png(input)?;
    if lr.height() < 8 || lr.width() < 8 {
        return Err(CliError::Data(format!(
            "{} is {}x{}; inputs must be at least 8x8",
            input.display(),
            lr.width(),
            lr.height()
        )));
    }
    let sr = pipeline::super_resolve(&model, &lr)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    save_png(&sr, &out)?;
    println!("wrote {} ({}x{})", out.display(), sr.width(), sr.height());
    Ok(())
}

fn parse_hr_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--hr-size expects WIDTHxHEIGHT, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

pub fn audit(common: &Common, checkpoint: Option<&Path>, preset: Option<String>, hr_size: &str) -> Result<(), CliError> {
    let (hr_w, hr_h) = parse_hr_size(hr_size)?;
    let model = match checkpoint {
        Some(p) => {
            let m = load_checkpoint(p)?;
            scale_matches(&m, common.scale)?;
            echo("audit", &format!("checkpoint = {}\nhr_size = {hr_w}x{hr_h}", p.display()));
            m
        }
        None => {
            let resolved = resolve(common, Overrides { preset, ..Overrides::default() })?;
            let m = &resolved.train.model;
            echo(
                "audit",
                &format!(
                    "scale = {}\nd = {}\nw = {}\nheads = {}\ngdfn_expansion = {}\ntransformer = {}\nhr_size = {hr_w}x{hr_h}",
                    m.scale, m.num_blocks, m.channels, m.mdta_heads, m.gdfn_expansion, m.transformer
                ),
            );
            ScetModel::<f32>::new(m.clone())?
        }
    };
    let report = audit::report(&model, hr_w, hr_h)?;
    let format = match common.format {
        Format::Text => ReportFormat::Text,
        Format::Csv => ReportFormat::Csv,
    };
    let text = report.render(format);
    if let Some(out) = &common.out {
        write_file(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

pub fn degrade(common: &Common, hr_dir: &Path) -> Result<(), CliError> {
    let out = common.out.clone().ok_or_else(|| CliError::Usage("degrade needs --out DIR".into()))?;
    let scale = common.scale.map(|s| s as usize).unwrap_or(settings::DEFAULT_SCALE);
    echo("degrade", &format!("hr = {}\nscale = {scale}\nout = {}", hr_dir.display(), out.display()));
    let paths = list_pngs(hr_dir)?;
    if paths.is_empty() {
        return Err(CliError::Data(format!("{} holds no PNG images", hr_dir.display())));
    }
    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    for p in &paths {
        let hr = load_png(p)?;
        let (h, w, cropped) = pipeline::divisible_extent(hr.height(), hr.width(), scale);
        if cropped {
            warn!("{}: centre-cropped {}x{} to {w}x{h} for scale {scale}", file_name(p), hr.width(), hr.height());
            println!("cropped {} {}x{} -> {w}x{h}", file_name(p), hr.width(), hr.height());
        }
        let (_, lr) = pipeline::degrade(&hr, scale)?;
        save_png(&lr, out.join(file_name(p)))?;
    }
    println!("wrote {} LR images to {}", paths.len(), out.display());
    Ok(())
}
