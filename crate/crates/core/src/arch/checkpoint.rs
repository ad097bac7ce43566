//! Binary checkpoint format (all integers little-endian, no padding):
//!
//! ```text
//! magic      b"SCETCKPT"
//! version    u32
//! config     d u32, w u32, s u32, heads u32, gdfn_expansion f64
//! count      u32
//! count ×    name_len u16, name (UTF-8), rank u8, extents u32 × rank, data f32 × numel
//! ```
//!
//! Whether the efficient transformer is present is not part of the header;
//! it follows from whether any `mdta.` parameter is stored.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{ArchError, ScetConfig, ScetModel};
use crate::tensor::{Real, Tensor};

pub const MAGIC: &[u8; 8] = b"SCETCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an SCET checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint holds unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint is missing parameter `{0}`")]
    MissingParameter(String),
    #[error("checkpoint config {found} does not match requested {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("checkpoint config rejected: {0}")]
    Config(#[from] ArchError),
}

fn describe(c: &ScetConfig) -> String {
    format!(
        "(d={}, w={}, s={}, heads={}, gdfn_expansion={}, transformer={})",
        c.num_blocks, c.channels, c.scale, c.mdta_heads, c.gdfn_expansion, c.transformer
    )
}

/// Serializes a model. Values are stored as `f32`.
pub fn encode<T: Real>(model: &ScetModel<T>) -> Vec<u8> {
    let c = model.config();
    let reg = model.registry();
    let mut out = Vec::with_capacity(64 + 4 * reg.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [c.num_blocks, c.channels, c.scale, c.mdta_heads] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.gdfn_expansion.to_le_bytes());
    out.extend_from_slice(&(reg.len() as u32).to_le_bytes());
    for (name, p) in reg.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(p.value.rank() as u8);
        for &e in p.value.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_f32().expect("finite parameter").to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Corrupt(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

struct Record {
    name: String,
    shape: Vec<usize>,
    data: Vec<f32>,
}

/// Parses and validates a serialized model.
pub fn decode(bytes: &[u8]) -> Result<ScetModel<f32>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let num_blocks = r.u32("num_blocks")? as usize;
    let channels = r.u32("channels")? as usize;
    let scale = r.u32("scale")? as usize;
    let mdta_heads = r.u32("mdta_heads")? as usize;
    let gdfn_expansion = r.f64("gdfn_expansion")?;
    let count = r.u32("parameter count")? as usize;

    let mut records = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| CheckpointError::Corrupt(format!("parameter {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        if !(1..=4).contains(&rank) {
            return Err(CheckpointError::Corrupt(format!("parameter `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32("extent").map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.take(numel.checked_mul(4).ok_or_else(|| CheckpointError::Corrupt("size overflow".into()))?, "data")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        records.push(Record { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let transformer = records.iter().any(|rec| rec.name.starts_with("mdta."));
    let config = ScetConfig {
        num_blocks,
        channels,
        scale,
        mdta_heads,
        gdfn_expansion,
        transformer,
        ..ScetConfig::default()
    };
    let mut model = ScetModel::<f32>::new(config)?;
    let mut seen = vec![false; model.registry().len()];
    for rec in records {
        let Some(id) = model.registry().id(&rec.name) else {
            return Err(CheckpointError::UnknownParameter(rec.name));
        };
        if seen[id] {
            return Err(CheckpointError::Corrupt(format!("parameter `{}` stored twice", rec.name)));
        }
        seen[id] = true;
        let p = model.registry_mut().get_mut(id);
        if p.value.shape() != rec.shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name: rec.name,
                expected: p.value.shape().to_vec(),
                found: rec.shape,
            });
        }
        p.value = Tensor::new(&rec.shape, rec.data).expect("shape checked");
    }
    if let Some(id) = seen.iter().position(|s| !s) {
        return Err(CheckpointError::MissingParameter(model.registry().name(id).to_string()));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(model: &ScetModel<T>, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ScetModel<f32>, CheckpointError> {
    decode(&fs::read(path)?)
}

/// Loads a checkpoint and requires its architecture to equal `expected`.
pub fn load_checkpoint_expecting(
    path: impl AsRef<Path>,
    expected: &ScetConfig,
) -> Result<ScetModel<f32>, CheckpointError> {
    let model = load_checkpoint(path)?;
    let found = model.config();
    let same = found.num_blocks == expected.num_blocks
        && found.channels == expected.channels
        && found.scale == expected.scale
        && found.mdta_heads == expected.mdta_heads
        && found.gdfn_expansion == expected.gdfn_expansion
        && found.transformer == expected.transformer;
    if !same {
        return Err(CheckpointError::ConfigMismatch { expected: describe(expected), found: describe(found) });
    }
    Ok(model)
}
