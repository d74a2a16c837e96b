//! Batch-all triplet loss computed independently on every strip and then
//! averaged over strips.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Averaging {
    /// Mean over every valid (anchor, positive, negative) triplet.
    AllTriplets,
    /// Mean over triplets with positive hinge only.
    NonzeroOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
    pub averaging: Averaging,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            averaging: Averaging::AllTriplets,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub per_strip: Vec<f64>,
    /// Active triplets summed over strips.
    pub nonzero: usize,
    /// Valid triplets per strip (the same for every strip).
    pub triplets: usize,
    /// d loss / d embeddings, shaped like the input.
    pub grad: Array3<f64>,
}

impl LossOutput {
    pub fn nonzero_fraction(&self) -> f64 {
        let total = self.triplets * self.per_strip.len();
        if total == 0 {
            0.0
        } else {
            self.nonzero as f64 / total as f64
        }
    }
}

/// `embeddings` is (samples, strips, dims). Distances are Euclidean on each
/// strip's vector.
pub fn batch_all_triplet_loss<L: PartialEq>(
    embeddings: &Array3<f64>,
    labels: &[L],
    cfg: &LossConfig,
) -> Result<LossOutput, TrainError> {
    let (n, strips, dim) = embeddings.dim();
    if labels.len() != n {
        return Err(TrainError::LabelCount {
            samples: n,
            labels: labels.len(),
        });
    }
    if !(cfg.margin >= 0.0) {
        return Err(TrainError::InvalidConfig("margin must be non-negative".into()));
    }
    let mut triplets = 0usize;
    for a in 0..n {
        let pos = (0..n).filter(|&p| p != a && labels[p] == labels[a]).count();
        let neg = (0..n).filter(|&q| labels[q] != labels[a]).count();
        triplets += pos * neg;
    }
    if triplets == 0 {
        return Err(TrainError::NoValidTriplets);
    }

    let mut grad = Array3::<f64>::zeros((n, strips, dim));
    let mut per_strip = Vec::with_capacity(strips);
    let mut nonzero = 0usize;
    let mut dist = vec![0.0; n * n];
    let mut coef = vec![0.0; n * n];
    for s in 0..strips {
        let strip = embeddings.index_axis(ndarray::Axis(1), s);
        for i in 0..n {
            for j in 0..n {
                let d: f64 = strip
                    .row(i)
                    .iter()
                    .zip(strip.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                dist[i * n + j] = d;
            }
        }
        coef.iter_mut().for_each(|c| *c = 0.0);
        let mut sum = 0.0;
        let mut active = 0usize;
        for a in 0..n {
            for p in 0..n {
                if p == a || labels[p] != labels[a] {
                    continue;
                }
                let d_ap = dist[a * n + p];
                for q in 0..n {
                    if labels[q] == labels[a] {
                        continue;
                    }
                    let h = cfg.margin + d_ap - dist[a * n + q];
                    if h > 0.0 {
                        sum += h;
                        active += 1;
                        coef[a * n + p] += 1.0;
                        coef[a * n + q] -= 1.0;
                    }
                }
            }
        }
        let denom = match cfg.averaging {
            Averaging::AllTriplets => triplets,
            Averaging::NonzeroOnly => active,
        };
        let strip_loss = if denom == 0 { 0.0 } else { sum / denom as f64 };
        per_strip.push(strip_loss);
        nonzero += active;
        if denom == 0 {
            continue;
        }
        let scale = 1.0 / (denom as f64 * strips as f64);
        for i in 0..n {
            for j in 0..n {
                let c = coef[i * n + j];
                let d = dist[i * n + j];
                if c == 0.0 || d == 0.0 {
                    continue;
                }
                let w = c * scale / d;
                for k in 0..dim {
                    let diff = embeddings[[i, s, k]] - embeddings[[j, s, k]];
                    grad[[i, s, k]] += w * diff;
                    grad[[j, s, k]] -= w * diff;
                }
            }
        }
    }
    let loss = per_strip.iter().sum::<f64>() / strips as f64;
    Ok(LossOutput {
        loss,
        per_strip,
        nonzero,
        triplets,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(vals: &[f64]) -> Array3<f64> {
        Array3::from_shape_vec((vals.len(), 1, 1), vals.to_vec()).unwrap()
    }

    #[test]
    fn hand_case_is_point_nine() {
        let out = batch_all_triplet_loss(&one_d(&[0.0, 2.0, 1.0, 3.0]), &['A', 'A', 'B', 'B'], &LossConfig::default())
            .unwrap();
        assert_eq!(out.triplets, 8);
        assert!((out.loss - 0.9).abs() < 1e-15);
        assert_eq!(out.nonzero, 6);
    }

    #[test]
    fn identical_embeddings_give_margin() {
        let e = Array3::from_elem((4, 3, 2), 0.5);
        let out = batch_all_triplet_loss(&e, &[0, 0, 1, 1], &LossConfig::default()).unwrap();
        assert!((out.loss - 0.2).abs() < 1e-12);
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn separated_clusters_give_zero() {
        let out = batch_all_triplet_loss(&one_d(&[0.0, 0.1, 5.0, 5.1]), &[0, 0, 1, 1], &LossConfig::default()).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.nonzero_fraction(), 0.0);
    }

    #[test]
    fn no_valid_triplets() {
        assert!(matches!(
            batch_all_triplet_loss(&one_d(&[0.0, 1.0, 2.0]), &[0, 1, 2], &LossConfig::default()),
            Err(TrainError::NoValidTriplets)
        ));
        assert!(matches!(
            batch_all_triplet_loss(&one_d(&[0.0, 1.0]), &[0, 0], &LossConfig::default()),
            Err(TrainError::NoValidTriplets)
        ));
    }

    #[test]
    fn nonzero_only_averaging() {
        let cfg = LossConfig {
            margin: 0.2,
            averaging: Averaging::NonzeroOnly,
        };
        let out = batch_all_triplet_loss(&one_d(&[0.0, 2.0, 1.0, 3.0]), &[0, 0, 1, 1], &cfg).unwrap();
        assert!((out.loss - 1.2).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let vals: Vec<f64> = (0..6 * 2 * 3).map(|i| ((i * 37 % 17) as f64 / 17.0) - 0.4).collect();
        let e = Array3::from_shape_vec((6, 2, 3), vals).unwrap();
        let labels = [0, 0, 1, 1, 2, 2];
        let cfg = LossConfig::default();
        let out = batch_all_triplet_loss(&e, &labels, &cfg).unwrap();
        let h = 1e-6;
        for idx in [[0, 0, 0], [3, 1, 2], [5, 0, 1], [2, 1, 0]] {
            let mut plus = e.clone();
            plus[idx] += h;
            let mut minus = e.clone();
            minus[idx] -= h;
            let fd = (batch_all_triplet_loss(&plus, &labels, &cfg).unwrap().loss
                - batch_all_triplet_loss(&minus, &labels, &cfg).unwrap().loss)
                / (2.0 * h);
            assert!((fd - out.grad[idx]).abs() < 1e-7, "{idx:?}: {fd} vs {}", out.grad[idx]);
        }
    }
}
