use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::mask::Silhouette;

/// p identities × k tracklets × c frames per batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub p: usize,
    pub k: usize,
    pub c: usize,
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            p: 8,
            k: 4,
            c: 30,
            flip_prob: 0.5,
            seed: 0,
        }
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.p < 2 {
            return Err(TrainError::InvalidConfig("p must be at least 2".into()));
        }
        if self.k < 2 {
            return Err(TrainError::InvalidConfig("k must be at least 2".into()));
        }
        if self.c < 1 {
            return Err(TrainError::InvalidConfig("c must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(TrainError::InvalidConfig("flip_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn samples_per_batch(&self) -> usize {
        self.p * self.k
    }
}

/// Training tracklets grouped by identity.
#[derive(Debug, Clone, Default)]
pub struct TrainIndex {
    identities: Vec<(String, Vec<Vec<Silhouette>>)>,
}

impl TrainIndex {
    /// Groups `(identity, frames)` pairs; identity order is first appearance.
    pub fn from_tracklets<I>(tracklets: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<Silhouette>)>,
    {
        let mut identities: Vec<(String, Vec<Vec<Silhouette>>)> = Vec::new();
        for (id, frames) in tracklets {
            if frames.is_empty() {
                continue;
            }
            match identities.iter_mut().find(|(i, _)| *i == id) {
                Some((_, t)) => t.push(frames),
                None => identities.push((id, vec![frames])),
            }
        }
        Self { identities }
    }

    pub fn num_identities(&self) -> usize {
        self.identities.len()
    }

    pub fn identity(&self, i: usize) -> &str {
        &self.identities[i].0
    }

    pub fn tracklets(&self, i: usize) -> &[Vec<Silhouette>] {
        &self.identities[i].1
    }
}

#[derive(Debug, Clone)]
pub struct BatchSample {
    /// Index of the identity inside the [`TrainIndex`].
    pub label: usize,
    pub frames: Vec<Silhouette>,
    pub flipped: bool,
}

/// `c` indices out of `len`: distinct when `len ≥ c`, otherwise drawn
/// with replacement.
pub fn sample_frame_indices<R: Rng + ?Sized>(len: usize, c: usize, rng: &mut R) -> Vec<usize> {
    if len >= c {
        index::sample(rng, len, c).into_vec()
    } else {
        (0..c).map(|_| rng.random_range(0..len)).collect()
    }
}

pub fn flip_tracklet(frames: &[Silhouette]) -> Vec<Silhouette> {
    frames.iter().map(Silhouette::flip_horizontal).collect()
}

pub fn sample_batch<R: Rng + ?Sized>(
    index: &TrainIndex,
    spec: &BatchSpec,
    rng: &mut R,
) -> Result<Vec<BatchSample>, TrainError> {
    spec.validate()?;
    if index.num_identities() < spec.p {
        return Err(TrainError::InsufficientIdentities {
            needed: spec.p,
            available: index.num_identities(),
        });
    }
    let ids = index::sample(rng, index.num_identities(), spec.p).into_vec();
    let mut out = Vec::with_capacity(spec.samples_per_batch());
    for id in ids {
        let tracklets = index.tracklets(id);
        for t in sample_frame_indices(tracklets.len(), spec.k, rng) {
            let src = &tracklets[t];
            let mut frames: Vec<Silhouette> = sample_frame_indices(src.len(), spec.c, rng)
                .into_iter()
                .map(|f| src[f].clone())
                .collect();
            let flipped = rng.random::<f64>() < spec.flip_prob;
            if flipped {
                frames = flip_tracklet(&frames);
            }
            out.push(BatchSample {
                label: id,
                frames,
                flipped,
            });
        }
    }
    Ok(out)
}
