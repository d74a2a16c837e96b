//! Brute-force reference implementations shared by the integration tests.
//! Each one is written from the definition, without reusing library code.

#![allow(dead_code)]

use partial_gait::mask::{BinaryGrid, Silhouette};
use rand::Rng;

/// Precision at each positive's rank, recounted from scratch per prefix.
pub fn ap_oracle(flags: &[bool]) -> Option<f64> {
    let positives = flags.iter().filter(|&&f| f).count();
    if positives == 0 {
        return None;
    }
    let mut total = 0.0;
    for k in 0..flags.len() {
        if flags[k] {
            let hits_in_prefix = flags[..=k].iter().filter(|&&f| f).count();
            total += hits_in_prefix as f64 / (k + 1) as f64;
        }
    }
    Some(total / positives as f64)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

pub struct Item {
    pub id: usize,
    pub cam: usize,
    pub feat: Vec<f64>,
}

pub struct CrossCameraOracle {
    pub map: f64,
    pub rank: Vec<f64>,
    pub queries: usize,
    pub excluded: usize,
}

/// Every item queries all items seen by other cameras; ties keep gallery
/// order (insertion sort on distance).
pub fn cross_camera_oracle(items: &[Item], ranks: &[usize]) -> CrossCameraOracle {
    let mut aps = Vec::new();
    let mut hits = vec![0usize; ranks.len()];
    let mut excluded = 0;
    for q in items {
        let mut order: Vec<(f64, bool)> = Vec::new();
        for g in items.iter().filter(|g| g.cam != q.cam) {
            let d = dist(&q.feat, &g.feat);
            let mut pos = order.len();
            while pos > 0 && order[pos - 1].0 > d {
                pos -= 1;
            }
            order.insert(pos, (d, g.id == q.id));
        }
        let flags: Vec<bool> = order.iter().map(|o| o.1).collect();
        match ap_oracle(&flags) {
            None => excluded += 1,
            Some(ap) => {
                aps.push(ap);
                let first = flags.iter().position(|&f| f).unwrap();
                for (h, &k) in hits.iter_mut().zip(ranks) {
                    if first < k {
                        *h += 1;
                    }
                }
            }
        }
    }
    let n = aps.len();
    CrossCameraOracle {
        map: aps.iter().sum::<f64>() / n as f64,
        rank: hits.iter().map(|&h| h as f64 / n as f64).collect(),
        queries: n,
        excluded,
    }
}

/// Triplet loss by enumeration: for every strip, every (anchor, positive,
/// negative) with anchor ≠ positive.
pub fn triplet_oracle(emb: &[Vec<Vec<f64>>], labels: &[usize], margin: f64, nonzero_only: bool) -> f64 {
    let n = emb.len();
    let strips = emb[0].len();
    let mut total = 0.0;
    for s in 0..strips {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut active = 0usize;
        for a in 0..n {
            for p in 0..n {
                for q in 0..n {
                    if a == p || labels[a] != labels[p] || labels[a] == labels[q] {
                        continue;
                    }
                    let h = margin + dist(&emb[a][s], &emb[p][s]) - dist(&emb[a][s], &emb[q][s]);
                    count += 1;
                    if h > 0.0 {
                        sum += h;
                        active += 1;
                    }
                }
            }
        }
        let denom = if nonzero_only { active } else { count };
        if denom > 0 {
            total += sum / denom as f64;
        }
    }
    total / strips as f64
}

pub struct AlignRef {
    pub top: usize,
    pub bottom: usize,
    pub scale: f64,
    pub center_x: f64,
    pub out: Vec<Vec<bool>>,
}

fn bilinear_sample(src: &[Vec<f64>], ox: usize, oy: usize, out_w: usize, out_h: usize) -> f64 {
    let (in_h, in_w) = (src.len(), src[0].len());
    let ratio_y = in_h as f64 / out_h as f64;
    let ratio_x = in_w as f64 / out_w as f64;
    let sy = ((oy as f64 + 0.5) * ratio_y - 0.5).max(0.0).min((in_h - 1) as f64);
    let sx = ((ox as f64 + 0.5) * ratio_x - 0.5).max(0.0).min((in_w - 1) as f64);
    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(in_h - 1), (x0 + 1).min(in_w - 1));
    let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
    let top = src[y0][x0] * (1.0 - fx) + src[y0][x1] * fx;
    let bot = src[y1][x0] * (1.0 - fx) + src[y1][x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Crop to foreground rows of `reference`, rescale to height 64, centre a
/// 44-column window on the reference's rescaled centroid, and apply the
/// same mapping to `target`.
pub fn align_oracle(reference: &[Vec<bool>], target: &[Vec<bool>]) -> Option<AlignRef> {
    let rows: Vec<usize> = (0..reference.len()).filter(|&y| reference[y].iter().any(|&v| v)).collect();
    let (top, bottom) = (*rows.first()?, *rows.last()?);
    let h = bottom - top + 1;
    let w = reference[0].len();
    let scale = 64.0 / h as f64;
    let out_w = ((w as f64 * scale).round() as usize).max(1);
    let crop = |g: &[Vec<bool>]| -> Vec<Vec<f64>> {
        g[top..=bottom]
            .iter()
            .map(|r| r.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let (cr, ct) = (crop(reference), crop(target));
    let mut sum = 0.0;
    let mut n = 0.0;
    for oy in 0..64 {
        for ox in 0..out_w {
            if bilinear_sample(&cr, ox, oy, out_w, 64) >= 0.5 {
                sum += ox as f64;
                n += 1.0;
            }
        }
    }
    if n == 0.0 {
        return None;
    }
    let center_x = sum / n;
    let left = center_x.round() as i64 - 22;
    let mut out = vec![vec![false; 44]; 64];
    for (oy, row) in out.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let sx = left + x as i64;
            if sx >= 0 && (sx as usize) < out_w {
                *cell = bilinear_sample(&ct, sx as usize, oy, out_w, 64) >= 0.5;
            }
        }
    }
    Some(AlignRef {
        top,
        bottom,
        scale,
        center_x,
        out,
    })
}

pub fn grid_rows(g: &BinaryGrid) -> Vec<Vec<bool>> {
    (0..g.height()).map(|y| (0..g.width()).map(|x| g.get(x, y)).collect()).collect()
}

/// Random silhouette: a union of a few axis-aligned blobs.
pub fn random_silhouette<R: Rng>(rng: &mut R) -> Silhouette {
    loop {
        let blobs: Vec<(usize, usize, usize, usize)> = (0..rng.random_range(1..5))
            .map(|_| {
                let x0 = rng.random_range(0..40);
                let y0 = rng.random_range(0..60);
                (x0, y0, x0 + rng.random_range(2..20), y0 + rng.random_range(2..40))
            })
            .collect();
        let g = BinaryGrid::from_fn(44, 64, |x, y| {
            blobs.iter().any(|&(x0, y0, x1, y1)| x >= x0 && x < x1 && y >= y0 && y < y1)
        });
        if let Ok(s) = Silhouette::from_grid(g) {
            return s;
        }
    }
}

/// Writes one line straight to stdout so the harness does not capture it.
pub fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
