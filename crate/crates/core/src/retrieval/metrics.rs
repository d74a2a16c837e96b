use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::distance::euclidean;
use super::RetrievalError;

pub const DEFAULT_RANKS: [usize; 3] = [1, 5, 10];

/// Average precision of one ranked list: the mean, over positives, of the
/// precision at that positive's rank.
pub fn average_precision(ranked_flags: &[bool]) -> Result<f64, RetrievalError> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &pos) in ranked_flags.iter().enumerate() {
        if pos {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(RetrievalError::NoPositives);
    }
    Ok(sum / hits as f64)
}

/// Gallery indices sorted by ascending distance; equal distances keep
/// gallery order.
pub fn rank_by_distance(distances: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..distances.len()).collect();
    idx.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub tracklet_id: String,
    pub identity: String,
    pub camera: String,
    pub feature: Vec<f64>,
}

/// Tracklet features with identity and camera metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GallerySet {
    entries: Vec<GalleryEntry>,
    dim: usize,
}

impl GallerySet {
    pub fn new(entries: Vec<GalleryEntry>) -> Result<Self, RetrievalError> {
        let dim = entries.first().map_or(0, |e| e.feature.len());
        for e in &entries {
            if e.feature.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dim,
                    found: e.feature.len(),
                });
            }
            if e.feature.iter().any(|v| !v.is_finite()) {
                return Err(RetrievalError::NonFinite(e.tracklet_id.clone()));
            }
        }
        Ok(Self { entries, dim })
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub tracklet_id: String,
    pub ap: f64,
    /// 1-based rank of the first correct match.
    pub first_hit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    /// (k, fraction of queries with a correct match in the top k).
    pub rank: Vec<(usize, f64)>,
    pub num_queries: usize,
    pub excluded_queries: usize,
    pub excluded_ids: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_query: Vec<QueryResult>,
}

impl MetricsReport {
    pub fn rank_k(&self, k: usize) -> Option<f64> {
        self.rank.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn rank1(&self) -> f64 {
        self.rank_k(1).unwrap_or(0.0)
    }
}

/// Every tracklet queries once against all tracklets from other cameras.
/// Queries without a same-identity match there are excluded and counted.
pub fn cross_camera_eval(set: &GallerySet, ranks: &[usize]) -> Result<MetricsReport, RetrievalError> {
    let entries = set.entries();
    let cameras: BTreeSet<&str> = entries.iter().map(|e| e.camera.as_str()).collect();
    if cameras.len() < 2 {
        return Err(RetrievalError::TooFewCameras(cameras.len()));
    }
    let mut per_query = Vec::new();
    let mut excluded_ids = Vec::new();
    for q in entries {
        let gallery: Vec<&GalleryEntry> = entries.iter().filter(|g| g.camera != q.camera).collect();
        let dists: Vec<f64> = gallery.iter().map(|g| euclidean(&q.feature, &g.feature)).collect();
        let flags: Vec<bool> = rank_by_distance(&dists)
            .into_iter()
            .map(|i| gallery[i].identity == q.identity)
            .collect();
        match average_precision(&flags) {
            Ok(ap) => per_query.push(QueryResult {
                tracklet_id: q.tracklet_id.clone(),
                ap,
                first_hit: flags.iter().position(|&f| f).expect("has positive") + 1,
            }),
            Err(RetrievalError::NoPositives) => excluded_ids.push(q.tracklet_id.clone()),
            Err(e) => return Err(e),
        }
    }
    if per_query.is_empty() {
        return Err(RetrievalError::NoValidQueries {
            excluded: excluded_ids.len(),
        });
    }
    let n = per_query.len() as f64;
    let map = per_query.iter().map(|q| q.ap).sum::<f64>() / n;
    let rank = ranks
        .iter()
        .map(|&k| (k, per_query.iter().filter(|q| q.first_hit <= k).count() as f64 / n))
        .collect();
    Ok(MetricsReport {
        map,
        rank,
        num_queries: per_query.len(),
        excluded_queries: excluded_ids.len(),
        excluded_ids,
        per_query,
    })
}
