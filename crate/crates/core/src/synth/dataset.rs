use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gen_identity, render_sequence, CameraSpec, IdentityParams, SynthError, View};
use crate::data_io::{write_label_map, write_manifest, Split, TrackletRecord};
use crate::mask::LabelMap;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub identities: usize,
    /// Camera templates; each sequence gets its own derived seed.
    pub cameras: Vec<CameraSpec>,
    pub tracklets_per_camera: usize,
    pub frames: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl DatasetSpec {
    /// Two frontal cameras with different zoom, mirroring and noise.
    pub fn frontal(identities: usize, seed: u64) -> Self {
        let a = CameraSpec {
            scale: 1.0,
            dropout: 0.02,
            appearance_jitter: 0.08,
            ..CameraSpec::new(View::Frontal)
        };
        let b = CameraSpec {
            scale: 0.85,
            mirror: true,
            dropout: 0.05,
            ..a
        };
        Self {
            identities,
            cameras: vec![a, b],
            tracklets_per_camera: 2,
            frames: 30,
            seed,
            val_fraction: 0.0,
            test_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidDataset(m.to_string()));
        if self.identities < 2 {
            return bad("need at least 2 identities");
        }
        if self.cameras.is_empty() || self.tracklets_per_camera == 0 || self.frames == 0 {
            return bad("cameras, tracklets_per_camera and frames must be non-zero");
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(0.0..=1.0).contains(&v) || !(0.0..=1.0).contains(&t) || v + t > 1.0 {
            return bad("split fractions must lie in [0, 1] and sum to at most 1");
        }
        for c in &self.cameras {
            c.validate()?;
        }
        Ok(())
    }

    /// Identity counts per split: train, val, test. Identities are assigned
    /// in that order.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.identities;
        let test = ((n as f64 * self.test_fraction).round() as usize).min(n);
        let val = ((n as f64 * self.val_fraction).round() as usize).min(n - test);
        (n - test - val, val, test)
    }

    fn split_of(&self, identity: usize) -> Split {
        let (train, val, _) = self.split_sizes();
        if identity < train {
            Split::Train
        } else if identity < train + val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthTracklet {
    pub record: TrackletRecord,
    pub identity: IdentityParams,
    pub maps: Vec<LabelMap>,
}

pub fn person_id(i: usize) -> String {
    format!("p{i:03}")
}

/// Renders the whole dataset in memory. Frame paths in the records are
/// where [`gen_dataset`] puts them, relative to the dataset root.
pub fn render_dataset(spec: &DatasetSpec) -> Result<Vec<SynthTracklet>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.identities * spec.cameras.len() * spec.tracklets_per_camera);
    for i in 0..spec.identities {
        let identity = gen_identity(rng.next_u64());
        let person = person_id(i);
        for (c, cam) in spec.cameras.iter().enumerate() {
            for k in 0..spec.tracklets_per_camera {
                let camera = cam.with_seed(rng.next_u64());
                let maps = render_sequence(&identity, &camera, spec.frames)?;
                let tracklet_id = format!("{person}-c{c}-t{k}");
                let frames = (0..spec.frames).map(|f| format!("{tracklet_id}/{f:03}.pgm")).collect();
                out.push(SynthTracklet {
                    record: TrackletRecord {
                        tracklet_id,
                        person_id: person.clone(),
                        camera_id: format!("c{c}"),
                        split: spec.split_of(i),
                        frames,
                        view: Some(cam.view.degrees()),
                        condition: None,
                        sequence: None,
                        instances: Vec::new(),
                    },
                    identity,
                    maps,
                });
            }
        }
    }
    Ok(out)
}

/// Writes label maps as PGM plus `manifest.jsonl` under `root`.
pub fn gen_dataset(spec: &DatasetSpec, root: &Path) -> Result<Vec<TrackletRecord>, SynthError> {
    let tracklets = render_dataset(spec)?;
    let mut records = Vec::with_capacity(tracklets.len());
    for t in tracklets {
        fs::create_dir_all(root.join(&t.record.tracklet_id))?;
        for (path, map) in t.record.frame_paths(root).iter().zip(&t.maps) {
            write_label_map(path, map)?;
        }
        records.push(t.record);
    }
    write_manifest(&root.join(MANIFEST_NAME), &records)?;
    Ok(records)
}
