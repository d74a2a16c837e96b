//! Tensor kernels with their reverse-mode counterparts.
//!
//! Feature maps are `Array3<f64>` in (channel, row, column) order, standard
//! layout. Convolutions are stride 1 with "same" zero padding and run as
//! im2col followed by a single gemm.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

use super::EmbedError;

/// Unfolds `input` into a (cin·k·k) × (h·w) patch matrix.
pub(crate) fn im2col(input: ArrayView3<f64>, k: usize) -> Array2<f64> {
    let (cin, h, w) = input.dim();
    let pad = k / 2;
    let mut cols = Array2::<f64>::zeros((cin * k * k, h * w));
    let src = input.as_slice().expect("standard layout");
    let dst = cols.as_slice_mut().expect("standard layout");
    for ci in 0..cin {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let out_row = &mut dst[row * h * w..(row + 1) * h * w];
                let dx = kx as isize - pad as isize;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = &src[(ci * h + sy as usize) * w..(ci * h + sy as usize + 1) * w];
                    let sx_lo = (x_lo as isize + dx) as usize;
                    let n = x_hi - x_lo;
                    out_row[y * w + x_lo..y * w + x_hi].copy_from_slice(&src_row[sx_lo..sx_lo + n]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input grid.
pub(crate) fn col2im(dcols: &Array2<f64>, cin: usize, h: usize, w: usize, k: usize) -> Array3<f64> {
    let pad = k / 2;
    let mut out = Array3::<f64>::zeros((cin, h, w));
    let src = dcols.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for ci in 0..cin {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let in_row = &src[row * h * w..(row + 1) * h * w];
                let dx = kx as isize - pad as isize;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let base = (ci * h + sy as usize) * w;
                    let sx_lo = (x_lo as isize + dx) as usize;
                    for (i, x) in (x_lo..x_hi).enumerate() {
                        dst[base + sx_lo + i] += in_row[y * w + x];
                    }
                }
            }
        }
    }
    out
}

/// Convolution with bias. Returns the pre-activation output and the patch
/// matrix needed by the backward pass.
pub(crate) fn conv_forward(
    input: ArrayView3<f64>,
    weight: ArrayView2<f64>,
    bias: &[f64],
    k: usize,
) -> (Array3<f64>, Array2<f64>) {
    let (_, h, w) = input.dim();
    let cout = weight.nrows();
    let cols = im2col(input, k);
    let mut out = Array2::<f64>::zeros((cout, h * w));
    for (mut row, &b) in out.rows_mut().into_iter().zip(bias) {
        row.fill(b);
    }
    general_mat_mul(1.0, &weight, &cols, 1.0, &mut out);
    let out = out.into_shape_with_order((cout, h, w)).expect("shape");
    (out, cols)
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `want_input` is set.
pub(crate) fn conv_backward(
    dout: &Array3<f64>,
    cols: &Array2<f64>,
    weight: ArrayView2<f64>,
    dweight: &mut [f64],
    dbias: &mut [f64],
    k: usize,
    want_input: bool,
) -> Option<Array3<f64>> {
    let (cout, h, w) = dout.dim();
    let d2 = dout
        .view()
        .into_shape_with_order((cout, h * w))
        .expect("standard layout");
    {
        let mut dw = ndarray::ArrayViewMut2::from_shape(weight.dim(), dweight).expect("shape");
        general_mat_mul(1.0, &d2, &cols.t(), 1.0, &mut dw);
    }
    for (db, row) in dbias.iter_mut().zip(d2.rows()) {
        *db += row.sum();
    }
    if !want_input {
        return None;
    }
    let cin = weight.ncols() / (k * k);
    let mut dcols = Array2::<f64>::zeros((weight.ncols(), h * w));
    general_mat_mul(1.0, &weight.t(), &d2, 0.0, &mut dcols);
    Some(col2im(&dcols, cin, h, w, k))
}

pub(crate) fn leaky_inplace(x: &mut Array3<f64>, slope: f64) {
    x.mapv_inplace(|v| if v > 0.0 { v } else { v * slope });
}

/// Multiplies `grad` by the leaky-rectifier derivative, read off the
/// activation output (its sign matches the pre-activation for slope ≥ 0).
pub(crate) fn leaky_backward_inplace(grad: &mut Array3<f64>, out: &Array3<f64>, slope: f64) {
    ndarray::Zip::from(grad).and(out).for_each(|g, &o| {
        if o <= 0.0 {
            *g *= slope;
        }
    });
}

/// 2×2 stride-2 max pooling. Also returns, for each output cell, the flat
/// input index of the first maximum in (row, column) scan order.
pub(crate) fn maxpool2_forward(x: &Array3<f64>) -> (Array3<f64>, Vec<u32>) {
    let (c, h, w) = x.dim();
    let (oh, ow) = (h / 2, w / 2);
    let src = x.as_slice().expect("standard layout");
    let mut out = Array3::<f64>::zeros((c, oh, ow));
    let mut idx = vec![0u32; c * oh * ow];
    let dst = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_i = (ci * h + 2 * oy) * w + 2 * ox;
                let mut best = src[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = (ci * h + 2 * oy + dy) * w + 2 * ox + dx;
                    if src[i] > best {
                        best = src[i];
                        best_i = i;
                    }
                }
                let o = (ci * oh + oy) * ow + ox;
                dst[o] = best;
                idx[o] = best_i as u32;
            }
        }
    }
    (out, idx)
}

pub(crate) fn maxpool2_backward(dout: &Array3<f64>, idx: &[u32], in_dim: (usize, usize, usize)) -> Array3<f64> {
    let mut dx = Array3::<f64>::zeros(in_dim);
    let dst = dx.as_slice_mut().expect("standard layout");
    for (&g, &i) in dout.iter().zip(idx) {
        dst[i as usize] += g;
    }
    dx
}

/// Elementwise maximum across a set of equally shaped maps, with the index
/// of the first member attaining it.
pub(crate) fn set_max<'a, I>(maps: I) -> Result<(Array3<f64>, Vec<u32>), EmbedError>
where
    I: IntoIterator<Item = &'a Array3<f64>>,
{
    let mut iter = maps.into_iter();
    let first = iter.next().ok_or(EmbedError::EmptySet)?;
    let mut out = first.clone();
    let mut arg = vec![0u32; out.len()];
    for (n, m) in iter.enumerate() {
        if m.dim() != out.dim() {
            return Err(EmbedError::ShapeMismatch {
                expected: vec![out.dim().0, out.dim().1, out.dim().2],
                found: vec![m.dim().0, m.dim().1, m.dim().2],
            });
        }
        let dst = out.as_slice_mut().expect("standard layout");
        let src = m.as_slice().expect("standard layout");
        for ((d, a), &s) in dst.iter_mut().zip(arg.iter_mut()).zip(src) {
            if s > *d {
                *d = s;
                *a = n as u32 + 1;
            }
        }
    }
    Ok((out, arg))
}

/// Per-band max and mean pooling for each scale, followed by that band's
/// own projection.
#[derive(Debug, Clone)]
pub(crate) struct HppCache {
    /// Pooled (max + mean) vectors, one row of length C per strip.
    pub pooled: Array2<f64>,
    /// Flat feature index of each band maximum, strips × C.
    pub argmax: Vec<u32>,
}

pub(crate) fn band_rows(h: usize, scale: usize, band: usize) -> std::ops::Range<usize> {
    let size = h / scale;
    band * size..(band + 1) * size
}

/// `proj` is laid out strips × D × C.
pub(crate) fn hpp_forward(
    feat: &Array3<f64>,
    scales: &[usize],
    proj: &[f64],
    dim: usize,
) -> Result<(Array2<f64>, HppCache), EmbedError> {
    let (c, h, w) = feat.dim();
    for &s in scales {
        if s == 0 || h % s != 0 {
            return Err(EmbedError::IndivisibleHeight { height: h, scale: s });
        }
    }
    let strips: usize = scales.iter().sum();
    let src = feat.as_slice().expect("standard layout");
    let mut pooled = Array2::<f64>::zeros((strips, c));
    let mut argmax = vec![0u32; strips * c];
    let mut strip = 0;
    for &s in scales {
        for band in 0..s {
            let rows = band_rows(h, s, band);
            let n = (rows.len() * w) as f64;
            for ci in 0..c {
                let lo = (ci * h + rows.start) * w;
                let hi = (ci * h + rows.end) * w;
                let mut best_i = lo;
                let mut sum = 0.0;
                for i in lo..hi {
                    if src[i] > src[best_i] {
                        best_i = i;
                    }
                    sum += src[i];
                }
                pooled[[strip, ci]] = src[best_i] + sum / n;
                argmax[strip * c + ci] = best_i as u32;
            }
            strip += 1;
        }
    }
    let mut out = Array2::<f64>::zeros((strips, dim));
    for s in 0..strips {
        let p = ArrayView2::from_shape((dim, c), &proj[s * dim * c..(s + 1) * dim * c]).expect("shape");
        out.row_mut(s).assign(&p.dot(&pooled.row(s)));
    }
    Ok((out, HppCache { pooled, argmax }))
}

pub(crate) fn hpp_backward(
    dstrips: ArrayView2<f64>,
    feat_dim: (usize, usize, usize),
    scales: &[usize],
    cache: &HppCache,
    proj: &[f64],
    dproj: &mut [f64],
) -> Array3<f64> {
    let (c, h, w) = feat_dim;
    let dim = dstrips.ncols();
    let mut dfeat = Array3::<f64>::zeros(feat_dim);
    let dst = dfeat.as_slice_mut().expect("standard layout");
    let mut strip = 0;
    for &s in scales {
        for band in 0..s {
            let g = dstrips.row(strip);
            let off = strip * dim * c;
            let p = ArrayView2::from_shape((dim, c), &proj[off..off + dim * c]).expect("shape");
            {
                let mut dp = ndarray::ArrayViewMut2::from_shape((dim, c), &mut dproj[off..off + dim * c]).expect("shape");
                for d in 0..dim {
                    let gd = g[d];
                    if gd == 0.0 {
                        continue;
                    }
                    for ci in 0..c {
                        dp[[d, ci]] += gd * cache.pooled[[strip, ci]];
                    }
                }
            }
            let dpooled = p.t().dot(&g);
            let rows = band_rows(h, s, band);
            let n = (rows.len() * w) as f64;
            for ci in 0..c {
                let gp = dpooled[ci];
                let lo = (ci * h + rows.start) * w;
                let hi = (ci * h + rows.end) * w;
                let share = gp / n;
                for v in &mut dst[lo..hi] {
                    *v += share;
                }
                dst[cache.argmax[strip * c + ci] as usize] += gp;
            }
            strip += 1;
        }
    }
    dfeat
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    /// Direct scalar convolution, zero padding, "same" output.
    fn conv_oracle(input: &Array3<f64>, weight: &[f64], bias: &[f64], cout: usize, k: usize) -> Array3<f64> {
        let (cin, h, w) = input.dim();
        let pad = k as isize / 2;
        let mut out = Array3::zeros((cout, h, w));
        for co in 0..cout {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = bias[co];
                    for ci in 0..cin {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let (sy, sx) = (y + ky - pad, x + kx - pad);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let wi = ((co * cin + ci) * k + ky as usize) * k + kx as usize;
                                acc += weight[wi] * input[[ci, sy as usize, sx as usize]];
                            }
                        }
                    }
                    out[[co, y as usize, x as usize]] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn hand_set_kernel_matches_hand_computation() {
        // 1-channel 3x3 input, 3x3 kernel picking centre + right neighbour
        let input = Array::from_shape_vec((1, 3, 3), (1..=9).map(f64::from).collect()).unwrap();
        let mut kernel = [0.0; 9];
        kernel[4] = 1.0;
        kernel[5] = 2.0;
        let wv = ArrayView2::from_shape((1, 9), &kernel).unwrap();
        let (out, _) = conv_forward(input.view(), wv, &[0.5], 3);
        // out[y][x] = in[y][x] + 2 * in[y][x+1] + 0.5 (zero past the right edge)
        let expected = [5.5, 8.5, 3.5, 14.5, 17.5, 6.5, 23.5, 26.5, 9.5];
        assert_eq!(out.as_slice().unwrap(), &expected);
    }

    #[test]
    fn conv_matches_scalar_oracle() {
        let (cin, cout, h, w, k) = (3, 4, 7, 6, 5);
        let input = Array::from_shape_fn((cin, h, w), |(c, y, x)| ((c * 31 + y * 7 + x * 3) % 11) as f64 - 5.0);
        let weight: Vec<f64> = (0..cout * cin * k * k).map(|i| ((i * 17) % 13) as f64 / 13.0 - 0.5).collect();
        let bias = [0.1, -0.2, 0.3, 0.0];
        let wv = ArrayView2::from_shape((cout, cin * k * k), &weight).unwrap();
        let (out, _) = conv_forward(input.view(), wv, &bias, k);
        let expected = conv_oracle(&input, &weight, &bias, cout, k);
        for (a, b) in out.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (cin, h, w, k) = (2, 5, 4, 3);
        let x = Array::from_shape_fn((cin, h, w), |(c, y, xx)| (c + 2 * y + 3 * xx) as f64 * 0.1);
        let y = Array::from_shape_fn((cin * k * k, h * w), |(i, j)| ((i * 7 + j * 5) % 9) as f64 - 4.0);
        let lhs: f64 = (&im2col(x.view(), k) * &y).sum();
        let rhs: f64 = (&x * &col2im(&y, cin, h, w, k)).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn maxpool_first_argmax_on_ties() {
        let x = Array3::from_elem((1, 2, 2), 1.0);
        let (out, idx) = maxpool2_forward(&x);
        assert_eq!(out[[0, 0, 0]], 1.0);
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn set_max_first_member_wins_ties() {
        let a = Array3::from_elem((1, 1, 2), 1.0);
        let mut b = a.clone();
        b[[0, 0, 1]] = 2.0;
        let (m, arg) = set_max([&a, &b, &b]).unwrap();
        assert_eq!(m.as_slice().unwrap(), &[1.0, 2.0]);
        assert_eq!(arg, vec![0, 1]);
        assert!(matches!(set_max(std::iter::empty()), Err(EmbedError::EmptySet)));
    }

    #[test]
    fn hpp_pools_constant_map_to_twice_value() {
        let feat = Array3::from_elem((3, 4, 2), 0.75);
        // identity-like projection D = C = 3
        let scales = [1, 2];
        let mut proj = vec![0.0; 3 * 3 * 3];
        for s in 0..3 {
            for d in 0..3 {
                proj[s * 9 + d * 3 + d] = 1.0;
            }
        }
        let (out, cache) = hpp_forward(&feat, &scales, &proj, 3).unwrap();
        assert_eq!(out.dim(), (3, 3));
        assert!(cache.pooled.iter().all(|&v| v == 1.5));
        assert!(out.iter().all(|&v| v == 1.5));
    }

    #[test]
    fn hpp_band_pooling_matches_enumeration() {
        // 1 channel, 4x2 map, scale 2 -> bands rows {0,1} and {2,3}
        let vals = [3.0, -1.0, 0.5, 2.0, -4.0, 7.0, 1.0, 1.0];
        let feat = Array3::from_shape_vec((1, 4, 2), vals.to_vec()).unwrap();
        let (_, cache) = hpp_forward(&feat, &[2], &[1.0, 1.0], 1).unwrap();
        for band in 0..2 {
            let px = &vals[band * 4..band * 4 + 4];
            let max = px.iter().cloned().fold(f64::MIN, f64::max);
            let mean = px.iter().sum::<f64>() / 4.0;
            assert_eq!(cache.pooled[[band, 0]], max + mean);
        }
        assert!(matches!(
            hpp_forward(&feat, &[3], &[1.0; 3], 1),
            Err(EmbedError::IndivisibleHeight { .. })
        ));
    }
}
