//! `GBE1` embedding store.
//!
//! ```text
//! "GBE1" | version u32 | dim u32 | count u32 |
//!   count × { id_len u32 | id (UTF-8) | dim × f32 }
//! ```
//! All integers and reals little-endian.

use std::collections::HashSet;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::binary::{atomic_write, Reader};

pub const STORE_MAGIC: &[u8; 4] = b"GBE1";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub tracklet_id: String,
    pub vector: Vec<f32>,
}

impl StoreEntry {
    pub fn new(tracklet_id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            tracklet_id: tracklet_id.into(),
            vector,
        }
    }

    pub fn from_f64(tracklet_id: impl Into<String>, v: &[f64]) -> Self {
        Self::new(tracklet_id, v.iter().map(|&x| x as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| f64::from(x)).collect()
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected GBE1")]
    BadMagic,
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("entry {id:?}: dimension {found}, expected {expected}")]
    DimMismatch { id: String, expected: usize, found: usize },
    #[error("truncated store")]
    Truncated,
    #[error("duplicate tracklet id {0:?}")]
    DuplicateId(String),
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in tracklet id")]
    BadId,
}

pub fn encode_store(entries: &[StoreEntry]) -> Result<Vec<u8>, StoreError> {
    let dim = entries.first().map_or(0, |e| e.vector.len());
    let mut seen = HashSet::new();
    let mut buf = Vec::with_capacity(16 + entries.len() * (dim * 4 + 24));
    buf.extend_from_slice(STORE_MAGIC);
    buf.extend_from_slice(&STORE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        if e.vector.len() != dim {
            return Err(StoreError::DimMismatch {
                id: e.tracklet_id.clone(),
                expected: dim,
                found: e.vector.len(),
            });
        }
        if !seen.insert(e.tracklet_id.as_str()) {
            return Err(StoreError::DuplicateId(e.tracklet_id.clone()));
        }
        buf.extend_from_slice(&(e.tracklet_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.tracklet_id.as_bytes());
        for &v in &e.vector {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

/// Header fields: (version, dim, count).
pub fn store_header(bytes: &[u8]) -> Result<(u32, usize, usize), StoreError> {
    let mut r = Reader::new(bytes);
    if r.take(4).ok_or(StoreError::Truncated)? != STORE_MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = r.u32().ok_or(StoreError::Truncated)?;
    let dim = r.u32().ok_or(StoreError::Truncated)? as usize;
    let count = r.u32().ok_or(StoreError::Truncated)? as usize;
    Ok((version, dim, count))
}

pub fn decode_store(bytes: &[u8]) -> Result<Vec<StoreEntry>, StoreError> {
    let (version, dim, count) = store_header(bytes)?;
    if version != STORE_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let mut r = Reader::new(&bytes[16..]);
    let mut out = Vec::with_capacity(count.min(1 << 20));
    let mut seen = HashSet::new();
    for _ in 0..count {
        let len = r.u32().ok_or(StoreError::Truncated)? as usize;
        let id = r.take(len).ok_or(StoreError::Truncated)?;
        let id = std::str::from_utf8(id).map_err(|_| StoreError::BadId)?.to_string();
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(r.f32().ok_or(StoreError::Truncated)?);
        }
        if !seen.insert(id.clone()) {
            return Err(StoreError::DuplicateId(id));
        }
        out.push(StoreEntry { tracklet_id: id, vector });
    }
    if !r.is_at_end() {
        let rest = bytes.len() - 16 - out.iter().map(|e| 4 + e.tracklet_id.len() + 4 * dim).sum::<usize>();
        return Err(StoreError::TrailingBytes(rest));
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, entries: &[StoreEntry]) -> Result<(), StoreError> {
    let bytes = encode_store(entries)?;
    atomic_write(path, |w| w.write_all(&bytes))?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Vec<StoreEntry>, StoreError> {
    decode_store(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, dim: usize) -> Vec<StoreEntry> {
        (0..n)
            .map(|i| StoreEntry::new(format!("t{i}"), (0..dim).map(|j| (i * dim + j) as f32 * 0.37 - 3.0).collect()))
            .collect()
    }

    #[test]
    fn header_records_dim_and_count() {
        let bytes = encode_store(&sample(3, 224)).unwrap();
        assert_eq!(&bytes[..4], b"GBE1");
        assert_eq!(store_header(&bytes).unwrap(), (1, 224, 3));
    }

    #[test]
    fn corrupted_magic_rejected() {
        let mut bytes = encode_store(&sample(2, 4)).unwrap();
        bytes[1] = b'X';
        assert!(matches!(decode_store(&bytes), Err(StoreError::BadMagic)));
    }

    #[test]
    fn truncated_and_trailing() {
        let bytes = encode_store(&sample(2, 4)).unwrap();
        assert!(matches!(decode_store(&bytes[..bytes.len() - 1]), Err(StoreError::Truncated)));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_store(&long), Err(StoreError::TrailingBytes(1))));
    }

    #[test]
    fn mixed_dims_and_duplicates_rejected_on_write() {
        let mut e = sample(2, 4);
        e[1].vector.pop();
        assert!(matches!(encode_store(&e), Err(StoreError::DimMismatch { .. })));
        let mut e = sample(2, 4);
        e[1].tracklet_id = "t0".into();
        assert!(matches!(encode_store(&e), Err(StoreError::DuplicateId(_))));
    }

    #[test]
    fn empty_store_roundtrips() {
        assert!(decode_store(&encode_store(&[]).unwrap()).unwrap().is_empty());
    }
}
