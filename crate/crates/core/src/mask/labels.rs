use super::{BinaryGrid, MaskError};

/// Part taxonomy of the human parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum BodyPart {
    Background = 0,
    Head = 1,
    Torso = 2,
    UpperArms = 3,
    LowerArms = 4,
    UpperLegs = 5,
    LowerLegs = 6,
}

impl BodyPart {
    pub const ALL: [BodyPart; 7] = [
        BodyPart::Background,
        BodyPart::Head,
        BodyPart::Torso,
        BodyPart::UpperArms,
        BodyPart::LowerArms,
        BodyPart::UpperLegs,
        BodyPart::LowerLegs,
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Per-pixel part labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::EmptyCanvas(width, height));
        }
        if labels.len() != width * height {
            return Err(MaskError::DimensionMismatch {
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 6) {
            return Err(MaskError::InvalidLabel(bad));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn background(width: usize, height: usize) -> Result<Self, MaskError> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, part: BodyPart) -> usize {
        self.labels.iter().filter(|&&l| l == part.id()).count()
    }

    /// Pixels carrying exactly `part`, as a binary grid.
    pub fn part_mask(&self, part: BodyPart) -> BinaryGrid {
        BinaryGrid::from_fn(self.width, self.height, |x, y| self.get(x, y) == part.id())
    }
}

/// Non-empty set of body-part ids, never containing background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartSubset(u8);

impl PartSubset {
    /// Head, torso, arms and legs.
    pub fn full() -> Self {
        PartSubset(0b111_1110)
    }

    /// Everything except the torso.
    pub fn partial() -> Self {
        PartSubset(0b111_1010)
    }

    pub fn from_ids(ids: &[u8]) -> Result<Self, MaskError> {
        let mut bits = 0u8;
        for &id in ids {
            if id == 0 || id > 6 {
                return Err(MaskError::InvalidPartSubset);
            }
            bits |= 1 << id;
        }
        if bits == 0 {
            return Err(MaskError::InvalidPartSubset);
        }
        Ok(PartSubset(bits))
    }

    #[inline]
    pub fn contains(self, label: u8) -> bool {
        label < 8 && self.0 & (1 << label) != 0
    }

    pub fn ids(self) -> Vec<u8> {
        (1..=6).filter(|&i| self.contains(i)).collect()
    }

    pub fn is_subset_of(self, other: PartSubset) -> bool {
        self.0 & !other.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceSource {
    ExternalFile,
    ConnectedComponents,
    None,
}

/// Candidate person masks for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaskSet {
    masks: Vec<BinaryGrid>,
    source: InstanceSource,
}

impl InstanceMaskSet {
    pub fn none() -> Self {
        Self {
            masks: Vec::new(),
            source: InstanceSource::None,
        }
    }

    pub fn external(masks: Vec<BinaryGrid>) -> Self {
        let source = if masks.is_empty() {
            InstanceSource::None
        } else {
            InstanceSource::ExternalFile
        };
        Self { masks, source }
    }

    /// Single mask holding the largest 4-connected component of `grid`.
    pub fn from_components(grid: &BinaryGrid) -> Self {
        Self {
            masks: vec![grid.largest_component()],
            source: InstanceSource::ConnectedComponents,
        }
    }

    pub fn masks(&self) -> &[BinaryGrid] {
        &self.masks
    }

    pub fn source(&self) -> InstanceSource {
        self.source
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Mask with the most foreground pixels; lowest index wins ties.
    pub fn largest(&self) -> Option<&BinaryGrid> {
        let mut best: Option<(usize, &BinaryGrid)> = None;
        for m in &self.masks {
            let area = m.count_ones();
            if best.is_none_or(|(a, _)| area > a) {
                best = Some((area, m));
            }
        }
        best.map(|(_, m)| m)
    }
}
