//! Manifest builder for the CASIA-B `ID/COND-SEQ/VIEW/frame` directory tree.

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::manifest::{Condition, Split, TrackletRecord};

pub const CASIA_VIEWS: [u32; 11] = [0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180];

/// Identities numbered up to this value are training identities.
pub const CASIA_TRAIN_IDS: u32 = 74;

/// The ten sequences recorded per identity and view.
pub fn casia_sequences() -> Vec<(Condition, u32)> {
    let mut v: Vec<_> = (1..=6).map(|s| (Condition::NM, s)).collect();
    v.extend((1..=2).map(|s| (Condition::BG, s)));
    v.extend((1..=2).map(|s| (Condition::CL, s)));
    v
}

#[derive(Debug, Error)]
pub enum CasiaLayoutError {
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("layout error: {}", offending.join("; "))]
    Layout { offending: Vec<String> },
}

fn is_frame(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm")
    )
}

fn list_dir(p: &Path) -> Result<Vec<PathBuf>, CasiaLayoutError> {
    let rd = std::fs::read_dir(p).map_err(|source| CasiaLayoutError::Io {
        path: p.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for e in rd {
        let e = e.map_err(|source| CasiaLayoutError::Io {
            path: p.display().to_string(),
            source,
        })?;
        out.push(e.path());
    }
    out.sort();
    Ok(out)
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// One record per (identity, sequence, view). Every identity directory must
/// hold all 10 sequences × 11 views with at least one frame each; all
/// violations are collected into a single [`CasiaLayoutError::Layout`].
pub fn build_casia_manifest(root: &Path) -> Result<Vec<TrackletRecord>, CasiaLayoutError> {
    let mut ids = Vec::new();
    let mut offending = Vec::new();
    for p in list_dir(root)? {
        if !p.is_dir() {
            continue;
        }
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match name.parse::<u32>() {
            Ok(n) => ids.push((n, name, p)),
            Err(_) => offending.push(format!("non-numeric identity directory {}", rel(root, &p))),
        }
    }
    ids.sort_by_key(|(n, _, _)| *n);

    let mut records = Vec::new();
    for (num, name, dir) in &ids {
        let split = if *num <= CASIA_TRAIN_IDS { Split::Train } else { Split::Test };
        for (cond, seq) in casia_sequences() {
            let seq_name = format!("{}-{:02}", cond.dir_prefix(), seq);
            let seq_dir = dir.join(&seq_name);
            if !seq_dir.is_dir() {
                offending.push(format!("missing {}", rel(root, &seq_dir)));
                continue;
            }
            for view in CASIA_VIEWS {
                let view_dir = seq_dir.join(format!("{view:03}"));
                if !view_dir.is_dir() {
                    offending.push(format!("missing {}", rel(root, &view_dir)));
                    continue;
                }
                let frames: Vec<String> = list_dir(&view_dir)?
                    .into_iter()
                    .filter(|f| f.is_file() && is_frame(f))
                    .map(|f| rel(root, &f))
                    .collect();
                if frames.is_empty() {
                    offending.push(format!("empty {}", rel(root, &view_dir)));
                    continue;
                }
                records.push(TrackletRecord {
                    tracklet_id: format!("{name}-{seq_name}-{view:03}"),
                    person_id: name.clone(),
                    camera_id: format!("{view:03}"),
                    split,
                    frames,
                    view: Some(view),
                    condition: Some(cond),
                    sequence: Some(seq),
                    instances: vec![],
                });
            }
        }
    }
    if !offending.is_empty() {
        return Err(CasiaLayoutError::Layout { offending });
    }
    Ok(records)
}
