use std::ops::Range;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    conv_backward, conv_forward, hpp_backward, hpp_forward, leaky_backward_inplace, leaky_inplace,
    maxpool2_backward, maxpool2_forward, set_max, HppCache,
};
use super::{EmbedError, ModelConfig};
use crate::mask::Silhouette;

/// Name, shape and position of one tensor inside the flat weight vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvSlot {
    offset: usize,
    cin: usize,
    cout: usize,
    k: usize,
}

impl ConvSlot {
    fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    fn weight(&self) -> Range<usize> {
        self.offset..self.offset + self.weight_len()
    }

    fn bias(&self) -> Range<usize> {
        let w = self.weight();
        w.end..w.end + self.cout
    }

    fn all(&self) -> Range<usize> {
        self.offset..self.bias().end
    }
}

#[derive(Debug, Clone)]
struct Layout {
    specs: Vec<ParamSpec>,
    convs: [ConvSlot; 3],
    global: Option<[ConvSlot; 2]>,
    proj: Vec<Range<usize>>,
    total: usize,
}

impl Layout {
    fn new(config: &ModelConfig) -> Self {
        let [c1, c2, c3] = config.conv_channels;
        let mut specs = Vec::new();
        let mut offset = 0;
        let mut push = |name: &str, shape: Vec<usize>, specs: &mut Vec<ParamSpec>| {
            let spec = ParamSpec {
                name: name.to_string(),
                shape,
                offset,
            };
            offset += spec.len();
            specs.push(spec);
            specs.last().unwrap().offset
        };
        let mut conv = |name: &str, cin: usize, cout: usize, k: usize, specs: &mut Vec<ParamSpec>| {
            let off = push(&format!("{name}.weight"), vec![cout, cin, k, k], specs);
            push(&format!("{name}.bias"), vec![cout], specs);
            ConvSlot { offset: off, cin, cout, k }
        };
        let convs = [
            conv("conv1", 1, c1, 5, &mut specs),
            conv("conv2", c1, c2, 3, &mut specs),
            conv("conv3", c2, c3, 3, &mut specs),
        ];
        let global = (config.branches == 2)
            .then(|| [conv("gconv2", c1, c2, 3, &mut specs), conv("gconv3", c2, c3, 3, &mut specs)]);
        let strips = config.strips_per_branch();
        let mut proj = Vec::new();
        for name in ["hpp.main", "hpp.global"].iter().take(config.branches) {
            let off = push(name, vec![strips, config.strip_dim, c3], &mut specs);
            proj.push(off..off + strips * config.strip_dim * c3);
        }
        Self {
            specs,
            convs,
            global,
            proj,
            total: offset,
        }
    }
}

/// Strip-structured identity representation of one frame set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    strips: Array2<f64>,
}

impl Embedding {
    pub fn from_strips(strips: Array2<f64>) -> Self {
        Self {
            strips: strips.as_standard_layout().into_owned(),
        }
    }

    pub fn strips(&self) -> &Array2<f64> {
        &self.strips
    }

    pub fn strip_count(&self) -> usize {
        self.strips.nrows()
    }

    pub fn dim(&self) -> usize {
        self.strips.ncols()
    }

    /// Row-major flattening, strip by strip.
    pub fn flat(&self) -> &[f64] {
        self.strips.as_slice().expect("standard layout")
    }

    pub fn is_finite(&self) -> bool {
        self.strips.iter().all(|v| v.is_finite())
    }
}

/// Set-pooled convolutional embedder. All weights live in one flat vector
/// described by [`GaitModel::param_specs`].
#[derive(Debug, Clone)]
pub struct GaitModel {
    config: ModelConfig,
    layout: Layout,
    weights: Vec<f64>,
}

impl PartialEq for GaitModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.weights == other.weights
    }
}

impl GaitModel {
    /// Fan-in uniform initialisation: He-uniform for conv kernels, 1/√fan_in
    /// for biases, Glorot-uniform for strip projections.
    pub fn init(config: ModelConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let gain = 6.0 / (1.0 + config.leaky_slope * config.leaky_slope);
        let mut weights = vec![0.0; layout.total];
        for spec in &layout.specs {
            let bound = match spec.shape.as_slice() {
                [_cout, cin, k, _] => (gain / (cin * k * k) as f64).sqrt(),
                [_] => {
                    // bias: fan-in of the kernel that precedes it
                    let kernel = layout
                        .specs
                        .iter()
                        .find(|s| s.offset + s.len() == spec.offset)
                        .expect("bias follows its kernel");
                    1.0 / ((kernel.shape[1] * kernel.shape[2] * kernel.shape[3]) as f64).sqrt()
                }
                [_, d, c] => (6.0 / (d + c) as f64).sqrt(),
                _ => unreachable!("layout only builds rank 1, 3 and 4 tensors"),
            };
            for w in &mut weights[spec.range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config,
            layout,
            weights,
        })
    }

    /// Rebuilds a model from explicit weights (checkpoint loading).
    pub fn from_weights(config: ModelConfig, weights: Vec<f64>) -> Result<Self, EmbedError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if weights.len() != layout.total {
            return Err(EmbedError::ShapeMismatch {
                expected: vec![layout.total],
                found: vec![weights.len()],
            });
        }
        Ok(Self {
            config,
            layout,
            weights,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.layout.specs
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn kernel(&self, slot: &ConvSlot) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((slot.cout, slot.cin * slot.k * slot.k), &self.weights[slot.weight()])
            .expect("layout shape")
    }

    fn conv(&self, slot: &ConvSlot, input: ArrayView3<f64>) -> (Array3<f64>, Array2<f64>) {
        let (mut out, cols) = conv_forward(input, self.kernel(slot), &self.weights[slot.bias()], slot.k);
        leaky_inplace(&mut out, self.config.leaky_slope);
        (out, cols)
    }

    fn check_image(&self, img: &Array2<f64>) -> Result<(), EmbedError> {
        let (h, w) = img.dim();
        if h == 0 || w == 0 || h % 4 != 0 || w % 4 != 0 {
            return Err(EmbedError::InvalidInput(format!(
                "frame {h}x{w}: both sides must be positive multiples of 4"
            )));
        }
        Ok(())
    }

    fn frame_forward(&self, img: &Array2<f64>) -> FrameCache {
        let [s1, s2, s3] = &self.layout.convs;
        let x = img.view().insert_axis(ndarray::Axis(0));
        let (a1, cols1) = self.conv(s1, x);
        let (p1, pool1) = maxpool2_forward(&a1);
        let (a2, cols2) = self.conv(s2, p1.view());
        let (p2, pool2) = maxpool2_forward(&a2);
        let (a3, cols3) = self.conv(s3, p2.view());
        FrameCache {
            cols1,
            a1,
            pool1,
            p1,
            cols2,
            a2,
            pool2,
            p2,
            cols3,
            a3,
        }
    }

    /// Final-stage frame-level feature map, (channels, H/4, W/4).
    pub fn frame_features(&self, frame: &Silhouette) -> Array3<f64> {
        self.frame_features_image(&silhouette_image(frame))
            .expect("silhouettes are 64x44")
    }

    pub fn frame_features_image(&self, img: &Array2<f64>) -> Result<Array3<f64>, EmbedError> {
        self.check_image(img)?;
        Ok(self.frame_forward(img).a3)
    }

    pub fn embed(&self, frames: &[Silhouette]) -> Result<Embedding, EmbedError> {
        let images: Vec<Array2<f64>> = frames.iter().map(silhouette_image).collect();
        self.embed_images(&images)
    }

    /// Inference path: keeps running set maxima instead of per-frame caches.
    pub fn embed_images(&self, frames: &[Array2<f64>]) -> Result<Embedding, EmbedError> {
        let first = frames.first().ok_or(EmbedError::EmptySet)?;
        self.check_image(first)?;
        let mut pooled: Option<[Array3<f64>; 3]> = None;
        for img in frames {
            if img.dim() != first.dim() {
                return Err(shape_err(first.dim(), img.dim()));
            }
            let c = self.frame_forward(img);
            match &mut pooled {
                None => pooled = Some([c.p1, c.p2, c.a3]),
                Some(acc) => {
                    for (m, v) in acc.iter_mut().zip([&c.p1, &c.p2, &c.a3]) {
                        ndarray::Zip::from(m).and(v).for_each(|m, &v| {
                            if v > *m {
                                *m = v;
                            }
                        });
                    }
                }
            }
        }
        let [s1, s2, s3] = pooled.expect("non-empty");
        let head = self.head_forward(&s1, &s2, s3)?;
        Ok(head.embedding)
    }

    /// Training path: forward pass that records everything the backward
    /// pass needs.
    pub fn forward_trace(&self, frames: &[Silhouette]) -> Result<ForwardTrace, EmbedError> {
        let images: Vec<Array2<f64>> = frames.iter().map(silhouette_image).collect();
        self.forward_trace_images(&images)
    }

    pub fn forward_trace_images(&self, frames: &[Array2<f64>]) -> Result<ForwardTrace, EmbedError> {
        let first = frames.first().ok_or(EmbedError::EmptySet)?;
        self.check_image(first)?;
        let mut caches = Vec::with_capacity(frames.len());
        for img in frames {
            if img.dim() != first.dim() {
                return Err(shape_err(first.dim(), img.dim()));
            }
            caches.push(self.frame_forward(img));
        }
        let (s1, arg1) = set_max(caches.iter().map(|c| &c.p1))?;
        let (s2, arg2) = set_max(caches.iter().map(|c| &c.p2))?;
        let (s3, arg3) = set_max(caches.iter().map(|c| &c.a3))?;
        let head = self.head_forward(&s1, &s2, s3)?;
        Ok(ForwardTrace {
            frames: caches,
            set_args: [arg1, arg2, arg3],
            head,
        })
    }

    fn head_forward(&self, s1: &Array3<f64>, s2: &Array3<f64>, s3: Array3<f64>) -> Result<HeadCache, EmbedError> {
        let scales = &self.config.pyramid_scales;
        let dim = self.config.strip_dim;
        let (main, main_cache) = hpp_forward(&s3, scales, &self.weights[self.layout.proj[0].clone()], dim)?;
        let mut strips = main;
        let global = match &self.layout.global {
            None => None,
            Some([g2, g3]) => {
                let (g2a, cols_g2) = self.conv(g2, s1.view());
                let (g2p, pool_g2) = maxpool2_forward(&g2a);
                let g3_in = &g2p + s2;
                let (g3a, cols_g3) = self.conv(g3, g3_in.view());
                let g3_out = &g3a + &s3;
                let (gs, g_cache) = hpp_forward(&g3_out, scales, &self.weights[self.layout.proj[1].clone()], dim)?;
                strips = ndarray::concatenate(ndarray::Axis(0), &[strips.view(), gs.view()]).expect("same width");
                Some(GlobalCache {
                    cols_g2,
                    g2a,
                    pool_g2,
                    cols_g3,
                    g3a,
                    g3_dim: g3_out.dim(),
                    hpp: g_cache,
                })
            }
        };
        Ok(HeadCache {
            s1_dim: s1.dim(),
            s2_dim: s2.dim(),
            s3_dim: s3.dim(),
            main: main_cache,
            global,
            embedding: Embedding::from_strips(strips),
        })
    }

    /// Convenience wrapper: forward then backward on the same frames.
    pub fn backward(&self, frames: &[Silhouette], upstream: &Array2<f64>) -> Result<Vec<f64>, EmbedError> {
        self.forward_trace(frames)?.backward(self, upstream.view())
    }
}

fn shape_err(a: (usize, usize), b: (usize, usize)) -> EmbedError {
    EmbedError::ShapeMismatch {
        expected: vec![a.0, a.1],
        found: vec![b.0, b.1],
    }
}

pub(crate) fn silhouette_image(s: &Silhouette) -> Array2<f64> {
    let g = s.grid();
    Array2::from_shape_vec((g.height(), g.width()), s.to_f64()).expect("grid dims")
}

struct FrameCache {
    cols1: Array2<f64>,
    a1: Array3<f64>,
    pool1: Vec<u32>,
    p1: Array3<f64>,
    cols2: Array2<f64>,
    a2: Array3<f64>,
    pool2: Vec<u32>,
    p2: Array3<f64>,
    cols3: Array2<f64>,
    a3: Array3<f64>,
}

struct GlobalCache {
    cols_g2: Array2<f64>,
    g2a: Array3<f64>,
    pool_g2: Vec<u32>,
    cols_g3: Array2<f64>,
    g3a: Array3<f64>,
    g3_dim: (usize, usize, usize),
    hpp: HppCache,
}

struct HeadCache {
    s1_dim: (usize, usize, usize),
    s2_dim: (usize, usize, usize),
    s3_dim: (usize, usize, usize),
    main: HppCache,
    global: Option<GlobalCache>,
    embedding: Embedding,
}

/// Recorded forward pass over one frame set.
pub struct ForwardTrace {
    frames: Vec<FrameCache>,
    set_args: [Vec<u32>; 3],
    head: HeadCache,
}

impl ForwardTrace {
    pub fn embedding(&self) -> &Embedding {
        &self.head.embedding
    }

    /// Exact reverse-mode gradient of `<upstream, embedding>` with respect
    /// to every weight. Max operations route to their first argmax.
    pub fn backward(&self, model: &GaitModel, upstream: ArrayView2<f64>) -> Result<Vec<f64>, EmbedError> {
        let emb = &self.head.embedding;
        if upstream.dim() != emb.strips().dim() {
            return Err(EmbedError::ShapeMismatch {
                expected: vec![emb.strip_count(), emb.dim()],
                found: vec![upstream.nrows(), upstream.ncols()],
            });
        }
        let cfg = &model.config;
        let slope = cfg.leaky_slope;
        let scales = &cfg.pyramid_scales;
        let layout = &model.layout;
        let per_branch = cfg.strips_per_branch();
        let mut grads = vec![0.0; layout.total];

        let mut d_s3 = hpp_backward(
            upstream.slice(ndarray::s![..per_branch, ..]),
            self.head.s3_dim,
            scales,
            &self.head.main,
            &model.weights[layout.proj[0].clone()],
            &mut grads[layout.proj[0].clone()],
        );
        let mut d_s2 = Array3::<f64>::zeros(self.head.s2_dim);
        let mut d_s1 = Array3::<f64>::zeros(self.head.s1_dim);

        if let (Some(g), Some([g2, g3])) = (&self.head.global, &layout.global) {
            let mut d_g3 = hpp_backward(
                upstream.slice(ndarray::s![per_branch.., ..]),
                g.g3_dim,
                scales,
                &g.hpp,
                &model.weights[layout.proj[1].clone()],
                &mut grads[layout.proj[1].clone()],
            );
            d_s3 += &d_g3;
            leaky_backward_inplace(&mut d_g3, &g.g3a, slope);
            let d_g3_in = conv_slot_backward(model, g3, &d_g3, &g.cols_g3, &mut grads, true).expect("input grad");
            d_s2 += &d_g3_in;
            let mut d_g2a = maxpool2_backward(&d_g3_in, &g.pool_g2, g.g2a.dim());
            leaky_backward_inplace(&mut d_g2a, &g.g2a, slope);
            d_s1 = conv_slot_backward(model, g2, &d_g2a, &g.cols_g2, &mut grads, true).expect("input grad");
        }

        let route = |d: &Array3<f64>, args: &[u32], n: usize| -> Vec<Option<Array3<f64>>> {
            let mut out: Vec<Option<Array3<f64>>> = (0..n).map(|_| None).collect();
            for (i, (&g, &f)) in d.iter().zip(args).enumerate() {
                if g == 0.0 {
                    continue;
                }
                let buf = out[f as usize].get_or_insert_with(|| Array3::zeros(d.dim()));
                buf.as_slice_mut().expect("standard layout")[i] += g;
            }
            out
        };
        let n = self.frames.len();
        let d_a3 = route(&d_s3, &self.set_args[2], n);
        let d_p2 = route(&d_s2, &self.set_args[1], n);
        let d_p1 = route(&d_s1, &self.set_args[0], n);

        let [c1, c2, c3] = &layout.convs;
        for (f, cache) in self.frames.iter().enumerate() {
            let mut dp2 = match &d_a3[f] {
                Some(d) => {
                    let mut d = d.clone();
                    leaky_backward_inplace(&mut d, &cache.a3, slope);
                    conv_slot_backward(model, c3, &d, &cache.cols3, &mut grads, true).expect("input grad")
                }
                None => Array3::zeros(cache.p2.dim()),
            };
            if let Some(extra) = &d_p2[f] {
                dp2 += extra;
            }
            if d_a3[f].is_none() && d_p2[f].is_none() && d_p1[f].is_none() {
                continue;
            }
            let mut da2 = maxpool2_backward(&dp2, &cache.pool2, cache.a2.dim());
            leaky_backward_inplace(&mut da2, &cache.a2, slope);
            let mut dp1 = conv_slot_backward(model, c2, &da2, &cache.cols2, &mut grads, true).expect("input grad");
            if let Some(extra) = &d_p1[f] {
                dp1 += extra;
            }
            let mut da1 = maxpool2_backward(&dp1, &cache.pool1, cache.a1.dim());
            leaky_backward_inplace(&mut da1, &cache.a1, slope);
            conv_slot_backward(model, c1, &da1, &cache.cols1, &mut grads, false);
        }
        Ok(grads)
    }
}

fn conv_slot_backward(
    model: &GaitModel,
    slot: &ConvSlot,
    dout: &Array3<f64>,
    cols: &Array2<f64>,
    grads: &mut [f64],
    want_input: bool,
) -> Option<Array3<f64>> {
    let (dw, db) = grads[slot.all()].split_at_mut(slot.weight_len());
    conv_backward(dout, cols, model.kernel(slot), dw, db, slot.k, want_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryGrid;

    fn tiny() -> ModelConfig {
        ModelConfig {
            conv_channels: [2, 3, 4],
            pyramid_scales: vec![1, 2],
            strip_dim: 3,
            branches: 2,
            leaky_slope: 0.1,
            seed: 7,
        }
    }

    fn blob(shift: usize) -> Silhouette {
        Silhouette::from_grid(BinaryGrid::from_fn(44, 64, |x, y| {
            (14 + shift..30 + shift).contains(&x) && (4..60).contains(&y) && (x + y) % 5 != 0
        }))
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = GaitModel::init(ModelConfig::desk()).unwrap();
        let b = GaitModel::init(ModelConfig::desk()).unwrap();
        let c = GaitModel::init(ModelConfig::desk().with_seed(1)).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn layout_covers_weights_exactly() {
        let m = GaitModel::init(tiny()).unwrap();
        let mut next = 0;
        for s in m.param_specs() {
            assert_eq!(s.offset, next);
            next += s.len();
        }
        assert_eq!(next, m.num_params());
        assert_eq!(m.param_specs().last().unwrap().name, "hpp.global");
    }

    #[test]
    fn frame_feature_shape() {
        let m = GaitModel::init(ModelConfig::desk()).unwrap();
        assert_eq!(m.frame_features(&blob(0)).dim(), (32, 16, 11));
    }

    #[test]
    fn zero_frame_output_comes_from_biases() {
        // Constant input: every interior pixel of every stage sees the same
        // receptive field, so the map is constant away from the borders and
        // changes only when biases change.
        let m = GaitModel::init(tiny()).unwrap();
        let zero = Array2::<f64>::zeros((64, 44));
        let f = m.frame_features_image(&zero).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        let mut kernels_only = m.clone();
        for s in m.param_specs().iter().filter(|s| s.name.ends_with(".weight")) {
            for w in &mut kernels_only.weights_mut()[s.range()] {
                *w *= 3.0;
            }
        }
        let f2 = kernels_only.frame_features_image(&zero).unwrap();
        // conv1 sees only zeros, so the first stage is pure bias; later
        // stages scale with kernels, so compare the first stage instead.
        let c1 = m.frame_forward(&zero).a1;
        let c1b = kernels_only.frame_forward(&zero).a1;
        assert_eq!(c1, c1b);
        assert_ne!(f, f2);
    }

    #[test]
    fn embedding_shape_and_paths_agree() {
        let m = GaitModel::init(tiny()).unwrap();
        let frames = vec![blob(0), blob(2), blob(1)];
        let e = m.embed(&frames).unwrap();
        assert_eq!(e.strips().dim(), (6, 3));
        assert_eq!(e.flat().len(), 18);
        assert!(e.is_finite());
        let t = m.forward_trace(&frames).unwrap();
        assert_eq!(t.embedding(), &e);
    }

    #[test]
    fn empty_set_rejected() {
        let m = GaitModel::init(tiny()).unwrap();
        assert!(matches!(m.embed(&[]), Err(EmbedError::EmptySet)));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let m = GaitModel::init(tiny()).unwrap();
        let g = m.backward(&[blob(0), blob(3)], &Array2::zeros((6, 3))).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(matches!(
            m.backward(&[blob(0)], &Array2::zeros((5, 3))),
            Err(EmbedError::ShapeMismatch { .. })
        ));
    }
}
