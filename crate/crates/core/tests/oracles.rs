mod common;

use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use partial_gait::embedder::{GaitModel, ModelConfig};
use partial_gait::mask::{
    apply_alignment, compute_alignment, process_tracklet, subtract_torso, BinaryGrid, InstanceMaskSet, PartSubset,
    PipelineConfig,
};
use partial_gait::retrieval::{distance_matrix, fuse, l2_norm, l2_normalize};
use partial_gait::synth::{gen_identity, render_sequence, CameraSpec, View};
use partial_gait::trainer::{
    sample_frame_indices, train, Adam, BatchSpec, LossConfig, TrainConfig, TrainIndex,
};

fn block_grid() -> BinaryGrid {
    BinaryGrid::from_fn(32, 32, |x, y| (5..=10).contains(&x) && (8..=17).contains(&y))
}

#[test]
fn block_alignment_matches_hand_derivation() {
    let g = block_grid();
    let frame = compute_alignment(&g).unwrap();
    assert_eq!((frame.row_top, frame.row_bottom), (8, 17));
    assert_eq!(frame.scale, 6.4);
    assert_eq!(frame.scaled_width(), 205);
    // Columns 5..=10 rescale to 32..=69, so the centre is 50.5 and the
    // window starts at 51 - 22 = 29.
    assert!((frame.center_x - 50.5).abs() < 1e-12);
    let out = apply_alignment(&g, &frame).unwrap();
    let grid = out.grid();
    for y in 0..64 {
        for x in 0..44 {
            assert_eq!(grid.get(x, y), (3..=40).contains(&x), "({x},{y})");
        }
    }
}

#[test]
fn alignment_matches_reference_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut compared = 0;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(4..70), rng.random_range(4..90));
        let full = BinaryGrid::from_fn(w, h, |_, _| rng.random_bool(0.3));
        let part = BinaryGrid::from_fn(w, h, |x, y| full.get(x, y) && rng.random_bool(0.7));
        let Some(want) = align_oracle(&grid_rows(&full), &grid_rows(&part)) else {
            assert!(compute_alignment(&full).is_err());
            continue;
        };
        let frame = compute_alignment(&full).unwrap();
        assert_eq!((frame.row_top, frame.row_bottom), (want.top, want.bottom));
        assert_eq!(frame.scale, want.scale);
        assert!((frame.center_x - want.center_x).abs() < 1e-9, "{w}x{h}: {} vs {}", frame.center_x, want.center_x);
        let got = apply_alignment(&part, &frame).map(|s| grid_rows(s.grid())).unwrap_or_else(|_| vec![vec![false; 44]; 64]);
        assert_eq!(got, want.out);
        compared += 1;
    }
    assert!(compared > 150);
}

#[test]
fn torso_subtraction_is_pixelwise_and_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let a = BinaryGrid::from_fn(8, 8, |_, _| rng.random_bool(0.5));
        let b = BinaryGrid::from_fn(8, 8, |_, _| rng.random_bool(0.5));
        let got = subtract_torso(&a, &b).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(got.get(x, y), a.get(x, y) && !b.get(x, y));
            }
        }
    }
    assert!(subtract_torso(&BinaryGrid::zeros(8, 8), &BinaryGrid::zeros(8, 7)).is_err());
}

#[test]
fn distance_matrix_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q: Vec<Vec<f64>> = (0..5).map(|_| (0..7).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let g: Vec<Vec<f64>> = (0..4).map(|_| (0..7).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let m = distance_matrix(&q, &g).unwrap();
    assert_eq!(m.dim(), (5, 4));
    for i in 0..5 {
        for j in 0..4 {
            assert!((m[[i, j]] - dist(&q[i], &g[j])).abs() < 1e-12);
        }
    }
}

#[test]
fn self_fusion_keeps_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vs: Vec<Vec<f64>> = (0..12).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let norm: Vec<Vec<f64>> = vs.iter().map(|v| l2_normalize(v).unwrap()).collect();
    let fused: Vec<Vec<f64>> = vs.iter().map(|v| fuse(v, v).unwrap()).collect();
    for i in 0..vs.len() {
        let order = |set: &[Vec<f64>]| {
            let mut idx: Vec<usize> = (0..set.len()).collect();
            idx.sort_by(|&a, &b| dist(&set[i], &set[a]).total_cmp(&dist(&set[i], &set[b])));
            idx
        };
        assert_eq!(order(&norm), order(&fused));
        assert!((l2_norm(&norm[i]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn duplicated_frames_give_identical_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = GaitModel::init(ModelConfig::desk().with_seed(5)).unwrap();
    let frames: Vec<_> = (0..3).map(|_| random_silhouette(&mut rng)).collect();
    let mut doubled = frames.clone();
    doubled.extend(frames.iter().cloned());
    let up = Array2::from_shape_fn((model.config().strip_count(), model.config().strip_dim), |_| {
        rng.random_range(-1.0..1.0)
    });
    assert_eq!(model.backward(&frames, &up).unwrap(), model.backward(&doubled, &up).unwrap());
}

#[test]
fn synthetic_sequence_yields_one_silhouette_per_frame() {
    let run = || {
        let maps = render_sequence(&gen_identity(11), &CameraSpec::new(View::Frontal), 30).unwrap();
        let frames: Vec<_> = maps.into_iter().map(|m| (m, InstanceMaskSet::none())).collect();
        process_tracklet(&frames, PartSubset::full(), &PipelineConfig::default()).unwrap()
    };
    let a = run();
    assert_eq!(a.silhouettes.len(), 30);
    assert!(a.dropped.is_empty());
    assert_eq!(a, run());
}

#[test]
fn adam_matches_scalar_reference() {
    let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
    let mut opt = Adam::new(1, lr, b1, b2, eps);
    let mut w = [0.0];
    let (mut rw, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    for t in 1..=200 {
        let g = 2.0 * (rw - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        rw -= lr * mh / (vh.sqrt() + eps);
        let grad = [2.0 * (w[0] - 3.0)];
        opt.step(&mut w, &grad);
        assert!((w[0] - rw).abs() < 1e-12, "step {t}");
    }
    assert!((w[0] - 3.0).abs() < 0.1);
}

#[test]
fn frame_sampling_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts = [0usize; 5];
    let draws = 10_000;
    for _ in 0..draws {
        let idx = sample_frame_indices(5, 2, &mut rng);
        assert_ne!(idx[0], idx[1]);
        for i in idx {
            counts[i] += 1;
        }
    }
    for c in counts {
        let f = c as f64 / draws as f64;
        assert!((f - 0.4).abs() < 0.02, "frequency {f}");
    }
}

fn small_index(ids: usize, seed: u64) -> TrainIndex {
    let tracklets = (0..ids).flat_map(|i| {
        let identity = gen_identity(seed + i as u64);
        (0..2).map(move |k| {
            let maps = render_sequence(&identity, &CameraSpec::new(View::Frontal).with_seed(k), 12).unwrap();
            let frames: Vec<_> = maps.into_iter().map(|m| (m, InstanceMaskSet::none())).collect();
            let sils = process_tracklet(&frames, PartSubset::partial(), &PipelineConfig::default()).unwrap();
            (format!("p{i}"), sils.silhouettes)
        })
    });
    TrainIndex::from_tracklets(tracklets)
}

fn smoke_run(iterations: usize) -> partial_gait::trainer::TrainOutcome {
    let spec = BatchSpec {
        p: 4,
        k: 2,
        c: 4,
        flip_prob: 0.5,
        seed: 9,
    };
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        iterations,
        checkpoint_every: iterations,
        ..Default::default()
    };
    let model = GaitModel::init(ModelConfig::desk().with_seed(1)).unwrap();
    train(model, &small_index(4, 100), &spec, &LossConfig::default(), &cfg, None).unwrap()
}

#[test]
fn training_reduces_loss_on_four_identities() {
    let out = smoke_run(200);
    let head: f64 = out.history[..10].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    let tail: f64 = out.history[190..].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    assert!(tail < head, "loss {head} -> {tail}");
}

#[test]
fn same_seed_training_is_reproducible() {
    let (a, b) = (smoke_run(15), smoke_run(15));
    let rows = |o: &partial_gait::trainer::TrainOutcome| {
        o.history.iter().map(|r| (r.iteration, r.loss.to_bits(), r.nonzero_fraction.to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(rows(&a), rows(&b));
    assert_eq!(a.last.weights(), b.last.weights());
}

#[test]
fn paper_config_has_62_strips() {
    let cfg = ModelConfig::paper_scale();
    assert_eq!(cfg.strip_count(), 62);
    assert_eq!(cfg.embedding_len(), 62 * 256);
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Golden {
    strips: usize,
    dim: usize,
    values: Vec<f64>,
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_embedding.json")
}

#[test]
fn embedding_matches_golden_file() {
    let maps = render_sequence(&gen_identity(7), &CameraSpec::new(View::Frontal), 8).unwrap();
    let frames: Vec<_> = maps.into_iter().map(|m| (m, InstanceMaskSet::none())).collect();
    let sils = process_tracklet(&frames, PartSubset::full(), &PipelineConfig::default()).unwrap().silhouettes;
    let model = GaitModel::init(ModelConfig::desk().with_seed(7)).unwrap();
    let emb = model.embed(&sils).unwrap();
    let got = Golden {
        strips: emb.strip_count(),
        dim: emb.dim(),
        values: emb.flat().to_vec(),
    };
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), serde_json::to_string_pretty(&got).unwrap()).unwrap();
    }
    let want: Golden = serde_json::from_str(&std::fs::read_to_string(golden_path()).unwrap()).unwrap();
    assert_eq!((got.strips, got.dim), (want.strips, want.dim));
    for (i, (g, w)) in got.values.iter().zip(&want.values).enumerate() {
        assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "value {i}: {g} vs {w}");
    }
}
