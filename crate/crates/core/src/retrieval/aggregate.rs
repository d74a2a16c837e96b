use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// How per-frame appearance features collapse into one tracklet vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    FrameMean,
    /// Non-overlapping runs of consecutive frames; an incomplete tail is
    /// dropped unless it is the only chunk.
    ChunkMean(usize),
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

pub fn aggregate_external_features(frames: &[Vec<f64>], mode: Aggregation) -> Result<Vec<f64>, RetrievalError> {
    let dim = frames.first().ok_or(RetrievalError::EmptyInput)?.len();
    if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
        return Err(RetrievalError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    match mode {
        Aggregation::FrameMean => Ok(mean_of(frames.iter(), dim)),
        Aggregation::ChunkMean(0) => Err(RetrievalError::InvalidChunk),
        Aggregation::ChunkMean(size) => {
            let full = frames.len() / size;
            if full == 0 {
                return Ok(mean_of(frames.iter(), dim));
            }
            let chunk_means: Vec<Vec<f64>> = frames
                .chunks_exact(size)
                .map(|c| mean_of(c.iter(), dim))
                .collect();
            Ok(mean_of(chunk_means.iter(), dim))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_constant_frames() {
        let one = vec![vec![1.5, -2.0]];
        for mode in [Aggregation::FrameMean, Aggregation::ChunkMean(4)] {
            assert_eq!(aggregate_external_features(&one, mode).unwrap(), vec![1.5, -2.0]);
            let constant = vec![vec![0.25, 3.0]; 9];
            assert_eq!(aggregate_external_features(&constant, mode).unwrap(), vec![0.25, 3.0]);
        }
    }

    #[test]
    fn seven_frames_chunk_three_drops_tail() {
        let frames: Vec<Vec<f64>> = (1..=7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let got = aggregate_external_features(&frames, Aggregation::ChunkMean(3)).unwrap();
        // chunk means: frames 1-3 -> (2, 14/3); frames 4-6 -> (5, 77/3)
        let expected = [(2.0 + 5.0) / 2.0, (14.0 / 3.0 + 77.0 / 3.0) / 2.0];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn short_tracklet_is_single_chunk() {
        let frames = vec![vec![1.0], vec![3.0]];
        assert_eq!(aggregate_external_features(&frames, Aggregation::ChunkMean(5)).unwrap(), vec![2.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            aggregate_external_features(&[], Aggregation::FrameMean),
            Err(RetrievalError::EmptyInput)
        );
        assert_eq!(
            aggregate_external_features(&[vec![1.0]], Aggregation::ChunkMean(0)),
            Err(RetrievalError::InvalidChunk)
        );
        assert!(aggregate_external_features(&[vec![1.0], vec![1.0, 2.0]], Aggregation::FrameMean).is_err());
    }
}
