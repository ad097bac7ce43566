//! Line-based `key = value` config files and flag resolution.
//!
//! Precedence is flags over file values over preset defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use scet_core::training::TrainConfig;

use crate::error::CliError;

pub const DEFAULT_PRESET: &str = "full";
pub const DEFAULT_SCALE: usize = 4;

/// One `key = value` line of a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let malformed = || CliError::Usage(format!("config line {line}: malformed entry `{}`", raw.trim()));
        let (key, value) = body.split_once('=').ok_or_else(malformed)?;
        let (key, value) = (key.trim(), value.trim());
        let key_ok = !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !key_ok || value.is_empty() || value.contains('=') {
            return Err(malformed());
        }
        entries.push(Entry { line, key: key.to_string(), value: value.to_string() });
    }
    Ok(entries)
}

pub fn read_config(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Everything a subcommand may need, after resolution.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub preset: String,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
}

/// Values given on the command line; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub scale: Option<usize>,
    pub d: Option<usize>,
    pub w: Option<usize>,
    pub no_transformer: bool,
    pub iters: Option<usize>,
    pub data: Option<PathBuf>,
}

fn parse<T: FromStr>(e: &Entry) -> Result<T, CliError> {
    e.value.parse().map_err(|_| {
        CliError::Usage(format!("config line {}: cannot parse `{}` for key `{}`", e.line, e.value, e.key))
    })
}

fn parse_bool(e: &Entry) -> Result<bool, CliError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("config line {}: `{}` is not a boolean for key `{}`", e.line, e.value, e.key))),
    }
}

fn find<'a>(entries: &'a [Entry], key: &str) -> Option<&'a Entry> {
    entries.iter().rev().find(|e| e.key == key)
}

pub fn resolve(entries: &[Entry], flags: &Overrides) -> Result<Resolved, CliError> {
    let preset = match (&flags.preset, find(entries, "preset")) {
        (Some(p), _) => p.clone(),
        (None, Some(e)) => e.value.clone(),
        (None, None) => DEFAULT_PRESET.to_string(),
    };
    let scale = match (flags.scale, find(entries, "scale")) {
        (Some(s), _) => s,
        (None, Some(e)) => parse(e)?,
        (None, None) => DEFAULT_SCALE,
    };
    let mut cfg = TrainConfig::preset(&preset, scale)?;
    let mut data = None;
    for e in entries {
        let c = &mut cfg;
        match e.key.as_str() {
            "preset" | "scale" => {}
            "data" => data = Some(PathBuf::from(&e.value)),
            "lr_dir" => c.lr_dir = Some(PathBuf::from(&e.value)),
            "d" => c.model.num_blocks = parse(e)?,
            "w" => c.model.channels = parse(e)?,
            "heads" => c.model.mdta_heads = parse(e)?,
            "gdfn_expansion" => c.model.gdfn_expansion = parse(e)?,
            "transformer" => c.model.transformer = parse_bool(e)?,
            "lr0" => c.lr0 = parse(e)?,
            "lr_min" => c.lr_min = parse(e)?,
            "total_iters" => c.total_iters = parse(e)?,
            "weight_decay" => c.weight_decay = parse(e)?,
            "batch_size" => c.batch_size = parse(e)?,
            "gt_patch" => c.gt_patch = parse(e)?,
            "seed" => c.seed = parse(e)?,
            "beta1" => c.betas.0 = parse(e)?,
            "beta2" => c.betas.1 = parse(e)?,
            "adam_eps" => c.adam_eps = parse(e)?,
            "log_every" => c.log_every = parse(e)?,
            "checkpoint_every" => c.checkpoint_every = parse(e)?,
            "augment" => c.augment = parse_bool(e)?,
            "init_gain" => c.init_gain = parse(e)?,
            other => return Err(CliError::Usage(format!("config line {}: unknown key `{other}`", e.line))),
        }
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(d) = flags.d {
        cfg.model.num_blocks = d;
    }
    if let Some(w) = flags.w {
        cfg.model.channels = w;
    }
    if flags.no_transformer {
        cfg.model.transformer = false;
    }
    if let Some(n) = flags.iters {
        cfg.total_iters = n;
    }
    if flags.data.is_some() {
        data = flags.data.clone();
    }
    cfg.model.validate()?;
    Ok(Resolved { preset, train: cfg, data })
}

/// Renders the resolved settings in config-file syntax, so the echo can be fed back in.
pub fn render(r: &Resolved) -> String {
    let c = &r.train;
    let m = &c.model;
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let mut lines = vec![format!("preset = {}", r.preset)];
    if let Some(d) = path(&r.data) {
        lines.push(format!("data = {d}"));
    }
    if let Some(d) = path(&c.lr_dir) {
        lines.push(format!("lr_dir = {d}"));
    }
    lines.extend([
        format!("scale = {}", m.scale),
        format!("d = {}", m.num_blocks),
        format!("w = {}", m.channels),
        format!("heads = {}", m.mdta_heads),
        format!("gdfn_expansion = {}", m.gdfn_expansion),
        format!("transformer = {}", m.transformer),
        format!("lr0 = {:e}", c.lr0),
        format!("lr_min = {:e}", c.lr_min),
        format!("total_iters = {}", c.total_iters),
        format!("weight_decay = {:e}", c.weight_decay),
        format!("batch_size = {}", c.batch_size),
        format!("gt_patch = {}", c.gt_patch),
        format!("seed = {}", c.seed),
        format!("beta1 = {}", c.betas.0),
        format!("beta2 = {}", c.betas.1),
        format!("adam_eps = {:e}", c.adam_eps),
        format!("log_every = {}", c.log_every),
        format!("checkpoint_every = {}", c.checkpoint_every),
        format!("augment = {}", c.augment),
        format!("init_gain = {}", c.init_gain),
    ]);
    lines.join("\n") + "\n"
}
