//! `GBM1` model checkpoints.
//!
//! Layout, all integers u32 little-endian:
//!
//! ```text
//! "GBM1" | version | config_len | config (UTF-8 JSON) | tensor_count |
//!   { name_len | name | rank | dims[rank] | f32 LE × prod(dims) } ...
//! ```
//!
//! Weights are held in f64 in memory and rounded to f32 on write.

use std::io::{self, Read};
use std::path::Path;

use thiserror::Error;

use super::{EmbedError, GaitModel, ModelConfig};
use crate::data_io::binary::{atomic_write, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GBM1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected GBM1")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("malformed config block: {0}")]
    Config(String),
    #[error("tensor {name}: {reason}")]
    Tensor { name: String, reason: String },
    #[error(transparent)]
    Model(#[from] EmbedError),
}

pub fn encode_checkpoint(model: &GaitModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(model.config()).expect("config serialises");
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(&cfg);
    let specs = model.param_specs();
    buf.extend_from_slice(&(specs.len() as u32).to_le_bytes());
    for spec in specs {
        buf.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(spec.name.as_bytes());
        buf.extend_from_slice(&(spec.shape.len() as u32).to_le_bytes());
        for &d in &spec.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &w in &model.weights()[spec.range()] {
            buf.extend_from_slice(&(w as f32).to_le_bytes());
        }
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<GaitModel, CheckpointError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4).ok_or(CheckpointError::Truncated)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32().ok_or(CheckpointError::Truncated)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let cfg_len = r.u32().ok_or(CheckpointError::Truncated)? as usize;
    let cfg_bytes = r.take(cfg_len).ok_or(CheckpointError::Truncated)?;
    let config: ModelConfig =
        serde_json::from_slice(cfg_bytes).map_err(|e| CheckpointError::Config(e.to_string()))?;
    let mut model = GaitModel::init(config)?;
    let specs = model.param_specs().to_vec();
    let count = r.u32().ok_or(CheckpointError::Truncated)? as usize;
    if count != specs.len() {
        return Err(CheckpointError::Tensor {
            name: "*".into(),
            reason: format!("expected {} tensors, found {count}", specs.len()),
        });
    }
    for spec in &specs {
        let name_len = r.u32().ok_or(CheckpointError::Truncated)? as usize;
        let name = r.take(name_len).ok_or(CheckpointError::Truncated)?;
        let name = String::from_utf8_lossy(name).into_owned();
        if name != spec.name {
            return Err(CheckpointError::Tensor {
                name,
                reason: format!("expected tensor {}", spec.name),
            });
        }
        let rank = r.u32().ok_or(CheckpointError::Truncated)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32().ok_or(CheckpointError::Truncated)? as usize);
        }
        if shape != spec.shape {
            return Err(CheckpointError::Tensor {
                name,
                reason: format!("shape {shape:?}, expected {:?}", spec.shape),
            });
        }
        let range = spec.range();
        for w in &mut model.weights_mut()[range] {
            *w = f64::from(r.f32().ok_or(CheckpointError::Truncated)?);
        }
    }
    Ok(model)
}

pub fn write_checkpoint(path: &Path, model: &GaitModel) -> Result<(), CheckpointError> {
    atomic_write(path, |w| w.write_all(&encode_checkpoint(model)))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<GaitModel, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
