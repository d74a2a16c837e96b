use std::fmt::Write as _;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{batch_all_triplet_loss, LossConfig};
use super::sampler::{sample_batch, BatchSpec, TrainIndex};
use super::TrainError;
use crate::embedder::GaitModel;
use crate::mask::Silhouette;
use crate::retrieval::{cross_camera_eval, GalleryEntry, GallerySet, DEFAULT_RANKS};

/// Above this many frames per batch the step recomputes each sample's
/// forward pass during backward instead of caching all of them.
const CACHE_FRAME_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            iterations: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(TrainError::InvalidConfig("checkpoint_every must be positive".into()));
        }
        Ok(())
    }
}

/// Held-out tracklets scored by cross-camera mAP at every checkpoint.
#[derive(Debug, Clone, Default)]
pub struct ValidationSet {
    pub tracklets: Vec<ValidationTracklet>,
}

#[derive(Debug, Clone)]
pub struct ValidationTracklet {
    pub tracklet_id: String,
    pub identity: String,
    pub camera: String,
    pub frames: Vec<Silhouette>,
}

impl ValidationSet {
    pub fn is_empty(&self) -> bool {
        self.tracklets.is_empty()
    }

    /// Embeds every tracklet with all of its frames.
    pub fn gallery(&self, model: &GaitModel) -> Result<GallerySet, TrainError> {
        let mut entries = Vec::with_capacity(self.tracklets.len());
        for t in &self.tracklets {
            let e = model.embed(&t.frames)?;
            entries.push(GalleryEntry {
                tracklet_id: t.tracklet_id.clone(),
                identity: t.identity.clone(),
                camera: t.camera.clone(),
                feature: e.flat().to_vec(),
            });
        }
        Ok(GallerySet::new(entries)?)
    }

    pub fn map(&self, model: &GaitModel) -> Result<f64, TrainError> {
        Ok(cross_camera_eval(&self.gallery(model)?, &DEFAULT_RANKS)?.map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub loss: f64,
    pub nonzero_fraction: f64,
    pub val_map: Option<f64>,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("iteration,loss,nonzero_fraction,val_mAP\n");
    for r in rows {
        let val = r.val_map.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(s, "{},{},{},{}", r.iteration, r.loss, r.nonzero_fraction, val).unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Highest validation mAP seen (earliest wins ties); the final model
    /// when there is no validation set.
    pub best: GaitModel,
    pub best_iteration: usize,
    pub best_map: Option<f64>,
    pub last: GaitModel,
    pub history: Vec<HistoryRow>,
}

/// One optimisation step's loss statistics and summed weight gradient.
pub fn batch_gradient(
    model: &GaitModel,
    batch: &[super::BatchSample],
    loss_cfg: &LossConfig,
) -> Result<(super::LossOutput, Vec<f64>), TrainError> {
    let total_frames: usize = batch.iter().map(|s| s.frames.len()).sum();
    let cache = total_frames <= CACHE_FRAME_LIMIT;
    let strips = model.config().strip_count();
    let dim = model.config().strip_dim;
    let mut emb = Array3::<f64>::zeros((batch.len(), strips, dim));
    let mut traces = Vec::new();
    for (i, s) in batch.iter().enumerate() {
        if cache {
            let t = model.forward_trace(&s.frames)?;
            emb.index_axis_mut(ndarray::Axis(0), i).assign(t.embedding().strips());
            traces.push(t);
        } else {
            let e = model.embed(&s.frames)?;
            emb.index_axis_mut(ndarray::Axis(0), i).assign(e.strips());
        }
    }
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let out = batch_all_triplet_loss(&emb, &labels, loss_cfg)?;
    let mut grads = vec![0.0; model.num_params()];
    for (i, s) in batch.iter().enumerate() {
        let up = out.grad.index_axis(ndarray::Axis(0), i);
        if up.iter().all(|&g| g == 0.0) {
            continue;
        }
        let g = if cache {
            traces[i].backward(model, up)?
        } else {
            model.forward_trace(&s.frames)?.backward(model, up)?
        };
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((out, grads))
}

pub fn train(
    model: GaitModel,
    data: &TrainIndex,
    spec: &BatchSpec,
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
    validation: Option<&ValidationSet>,
) -> Result<TrainOutcome, TrainError> {
    spec.validate()?;
    cfg.validate()?;
    let validation = validation.filter(|v| !v.is_empty());
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut opt = Adam::new(model.num_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(f64, usize, GaitModel)> = None;

    for it in 1..=cfg.iterations {
        let batch = sample_batch(data, spec, &mut rng)?;
        let (out, grads) = batch_gradient(&model, &batch, loss_cfg)?;
        opt.step(model.weights_mut(), &grads);
        let mut row = HistoryRow {
            iteration: it,
            loss: out.loss,
            nonzero_fraction: out.nonzero_fraction(),
            val_map: None,
        };
        if let Some(v) = validation {
            if it % cfg.checkpoint_every == 0 || it == cfg.iterations {
                let map = v.map(&model)?;
                row.val_map = Some(map);
                if best.as_ref().is_none_or(|(b, _, _)| map > *b) {
                    best = Some((map, it, model.clone()));
                }
            }
        }
        history.push(row);
    }
    let (best_map, best_iteration, best_model) = match best {
        Some((m, it, b)) => (Some(m), it, b),
        None => (None, cfg.iterations, model.clone()),
    };
    Ok(TrainOutcome {
        best: best_model,
        best_iteration,
        best_map,
        last: model,
        history,
    })
}
