use super::{BinaryGrid, MaskError};

pub const SIL_HEIGHT: usize = 64;
pub const SIL_WIDTH: usize = 44;

/// Canonical 64 rows × 44 columns binary silhouette with at least one
/// foreground pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Silhouette {
    grid: BinaryGrid,
    foreground_count: usize,
}

impl Silhouette {
    pub fn from_grid(grid: BinaryGrid) -> Result<Self, MaskError> {
        if grid.dims() != (SIL_WIDTH, SIL_HEIGHT) {
            return Err(MaskError::DimensionMismatch {
                expected: (SIL_WIDTH, SIL_HEIGHT),
                found: grid.dims(),
            });
        }
        let foreground_count = grid.count_ones();
        if foreground_count == 0 {
            return Err(MaskError::EmptySilhouette);
        }
        Ok(Self {
            grid,
            foreground_count,
        })
    }

    pub fn grid(&self) -> &BinaryGrid {
        &self.grid
    }

    pub fn into_grid(self) -> BinaryGrid {
        self.grid
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground_count
    }

    pub fn flip_horizontal(&self) -> Silhouette {
        Silhouette {
            grid: self.grid.flip_horizontal(),
            foreground_count: self.foreground_count,
        }
    }

    /// Pixels as 0.0/1.0, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.grid.cells().iter().map(|&v| f64::from(v)).collect()
    }
}

/// Crop rows, uniform scale to height 64, and horizontal centre, all taken
/// from one reference (full-body) grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentFrame {
    pub row_top: usize,
    pub row_bottom: usize,
    pub scale: f64,
    pub center_x: f64,
    source_dims: (usize, usize),
}

impl AlignmentFrame {
    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    /// Width of the source after uniform rescaling to height 64.
    pub fn scaled_width(&self) -> usize {
        scaled_width(self.source_dims.0, self.scale)
    }
}

fn scaled_width(width: usize, scale: f64) -> usize {
    ((width as f64 * scale).round() as usize).max(1)
}

pub fn compute_alignment(full_body: &BinaryGrid) -> Result<AlignmentFrame, MaskError> {
    let (w, h) = full_body.dims();
    let rows_with_fg: Vec<usize> = (0..h)
        .filter(|&y| full_body.row(y).iter().any(|&v| v != 0))
        .collect();
    let (Some(&row_top), Some(&row_bottom)) = (rows_with_fg.first(), rows_with_fg.last()) else {
        return Err(MaskError::EmptySilhouette);
    };
    let scale = SIL_HEIGHT as f64 / (row_bottom - row_top + 1) as f64;
    let out_w = scaled_width(w, scale);
    let resized = resize_rows(full_body, row_top, row_bottom, out_w);

    let mut sum_x = 0.0;
    let mut n = 0usize;
    for (i, &v) in resized.iter().enumerate() {
        if v {
            sum_x += (i % out_w) as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MaskError::EmptySilhouette);
    }
    Ok(AlignmentFrame {
        row_top,
        row_bottom,
        scale,
        center_x: sum_x / n as f64,
        source_dims: (w, h),
    })
}

pub fn apply_alignment(target: &BinaryGrid, frame: &AlignmentFrame) -> Result<Silhouette, MaskError> {
    super::grid::check_dims(frame.source_dims, target.dims())?;
    let out_w = frame.scaled_width();
    let resized = resize_rows(target, frame.row_top, frame.row_bottom, out_w);
    let center = frame.center_x.round() as i64;
    let left = center - (SIL_WIDTH as i64 / 2);
    let grid = BinaryGrid::from_fn(SIL_WIDTH, SIL_HEIGHT, |x, y| {
        let sx = left + x as i64;
        sx >= 0 && (sx as usize) < out_w && resized[y * out_w + sx as usize]
    });
    Silhouette::from_grid(grid)
}

/// Bilinear resize of rows `top..=bottom` to 64 × `out_w`, thresholded at 0.5.
/// Sample positions use pixel-centre mapping, clamped at the borders.
fn resize_rows(grid: &BinaryGrid, top: usize, bottom: usize, out_w: usize) -> Vec<bool> {
    let in_h = bottom - top + 1;
    let in_w = grid.width();
    let ry = in_h as f64 / SIL_HEIGHT as f64;
    let rx = in_w as f64 / out_w as f64;

    let xs: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|ox| sample_pos(ox, rx, in_w))
        .collect();
    let mut out = Vec::with_capacity(SIL_HEIGHT * out_w);
    for oy in 0..SIL_HEIGHT {
        let (y0, y1, fy) = sample_pos(oy, ry, in_h);
        let r0 = grid.row(top + y0);
        let r1 = grid.row(top + y1);
        for &(x0, x1, fx) in &xs {
            let top_v = f64::from(r0[x0]) * (1.0 - fx) + f64::from(r0[x1]) * fx;
            let bot_v = f64::from(r1[x0]) * (1.0 - fx) + f64::from(r1[x1]) * fx;
            let v = top_v * (1.0 - fy) + bot_v * fy;
            out.push(v >= 0.5);
        }
    }
    out
}

fn sample_pos(o: usize, ratio: f64, len: usize) -> (usize, usize, f64) {
    let s = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f64)
}
