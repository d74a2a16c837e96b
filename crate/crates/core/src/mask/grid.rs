use super::MaskError;

/// Row-major binary raster. Cells hold 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryGrid {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    /// Builds a grid from row-major cells; any nonzero cell becomes 1.
    pub fn from_cells(width: usize, height: usize, cells: Vec<u8>) -> Result<Self, MaskError> {
        if cells.len() != width * height {
            return Err(MaskError::DimensionMismatch {
                expected: (width, height),
                found: (cells.len(), 1),
            });
        }
        let data = cells.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = u8::from(value);
    }

    pub fn cells(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// True when every 1-cell of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryGrid) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a <= b)
    }

    pub fn and(&self, other: &BinaryGrid) -> Result<BinaryGrid, MaskError> {
        check_dims(self.dims(), other.dims())?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect();
        Ok(BinaryGrid {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn and_not(&self, other: &BinaryGrid) -> Result<BinaryGrid, MaskError> {
        check_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a & (1 - b))
            .collect();
        Ok(BinaryGrid {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Left-right mirror.
    pub fn flip_horizontal(&self) -> BinaryGrid {
        let mut out = BinaryGrid::zeros(self.width, self.height);
        for y in 0..self.height {
            let src = self.row(y);
            let dst = &mut out.data[y * self.width..(y + 1) * self.width];
            for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *s;
            }
        }
        out
    }

    /// Largest 4-connected foreground component; ties go to the component
    /// whose first pixel comes first in row-major order.
    pub fn largest_component(&self) -> BinaryGrid {
        let (w, h) = self.dims();
        let mut label = vec![0u32; w * h];
        let mut best = (0usize, 0u32);
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if self.data[start] == 0 || label[start] != 0 {
                continue;
            }
            next += 1;
            label[start] = next;
            stack.push(start);
            let mut size = 0usize;
            while let Some(i) = stack.pop() {
                size += 1;
                let (x, y) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if self.data[j] != 0 && label[j] == 0 {
                        label[j] = next;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            if size > best.0 {
                best = (size, next);
            }
        }
        let data = label
            .iter()
            .map(|&l| u8::from(best.1 != 0 && l == best.1))
            .collect();
        BinaryGrid {
            width: w,
            height: h,
            data,
        }
    }
}

pub(crate) fn check_dims(
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<(), MaskError> {
    if expected != found {
        return Err(MaskError::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_maps_columns() {
        let g = BinaryGrid::from_fn(5, 2, |x, y| x == 1 && y == 0);
        let f = g.flip_horizontal();
        assert!(f.get(3, 0));
        assert_eq!(f.count_ones(), 1);
        assert_eq!(f.flip_horizontal(), g);
    }

    #[test]
    fn largest_component_picks_bigger_blob() {
        // 3-pixel blob on the left, 4-pixel blob on the right, diagonal contact only
        let g = BinaryGrid::from_fn(6, 3, |x, y| (x == 0 && y < 3) || (x >= 2 && x < 4 && y >= 1));
        let c = g.largest_component();
        assert_eq!(c.count_ones(), 4);
        assert!(c.get(2, 1) && !c.get(0, 0));
    }

    #[test]
    fn largest_component_tie_prefers_first() {
        let g = BinaryGrid::from_fn(5, 1, |x, _| x != 2);
        let c = g.largest_component();
        assert!(c.get(0, 0) && c.get(1, 0) && !c.get(3, 0));
    }

    #[test]
    fn from_cells_rejects_bad_length() {
        assert!(BinaryGrid::from_cells(3, 3, vec![0; 8]).is_err());
    }
}
