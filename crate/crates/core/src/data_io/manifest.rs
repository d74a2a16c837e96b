//! JSON-lines tracklet manifests. One [`TrackletRecord`] per line; frame
//! paths are relative to the dataset root.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::binary::atomic_write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// CASIA-B walking condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    NM,
    BG,
    CL,
}

impl Condition {
    pub fn dir_prefix(self) -> &'static str {
        match self {
            Condition::NM => "nm",
            Condition::BG => "bg",
            Condition::CL => "cl",
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nm" => Ok(Condition::NM),
            "bg" => Ok(Condition::BG),
            "cl" => Ok(Condition::CL),
            _ => Err(format!("unknown condition {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackletRecord {
    pub tracklet_id: String,
    pub person_id: String,
    pub camera_id: String,
    pub split: Split,
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<u32>,
    /// Optional per-frame instance mask files, parallel to `frames`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<Vec<String>>,
}

impl TrackletRecord {
    fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("tracklet_id", &self.tracklet_id),
            ("person_id", &self.person_id),
            ("camera_id", &self.camera_id),
        ] {
            if v.is_empty() {
                return Err(format!("{name} is empty"));
            }
        }
        if self.frames.is_empty() {
            return Err("frames is empty".into());
        }
        if !self.instances.is_empty() && self.instances.len() != self.frames.len() {
            return Err("instances must be parallel to frames".into());
        }
        Ok(())
    }

    pub fn frame_paths(&self, root: &Path) -> Vec<PathBuf> {
        self.frames.iter().map(|f| root.join(f)).collect()
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate tracklet_id {id:?}")]
    DuplicateId { line: usize, id: String },
}

pub fn parse_manifest_str(text: &str) -> Result<Vec<TrackletRecord>, ManifestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: TrackletRecord = serde_json::from_str(raw).map_err(|e| ManifestError::MalformedLine {
            line,
            reason: e.to_string(),
        })?;
        rec.validate()
            .map_err(|reason| ManifestError::MalformedLine { line, reason })?;
        if !seen.insert(rec.tracklet_id.clone()) {
            return Err(ManifestError::DuplicateId {
                line,
                id: rec.tracklet_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_manifest(path: &Path) -> Result<Vec<TrackletRecord>, ManifestError> {
    parse_manifest_str(&std::fs::read_to_string(path)?)
}

pub fn manifest_to_string(records: &[TrackletRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serialises"));
        s.push('\n');
    }
    s
}

pub fn write_manifest(path: &Path, records: &[TrackletRecord]) -> Result<(), ManifestError> {
    let text = manifest_to_string(records);
    atomic_write(path, |w| w.write_all(text.as_bytes()))?;
    Ok(())
}
