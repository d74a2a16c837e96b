use super::{
    apply_alignment, compose_silhouette, compute_alignment, subtract_torso, BinaryGrid, InstanceMaskSet, LabelMap,
    MaskError, PartSubset, Silhouette,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Aligned outputs with fewer foreground pixels are dropped.
    pub min_foreground: usize,
    /// Gate by the largest 4-connected component when a frame has no
    /// instance masks.
    pub component_gating: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_foreground: 16,
            component_gating: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    EmptyFullBody,
    EmptyTarget,
    BelowMinForeground(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DroppedFrame {
    pub index: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackletSilhouettes {
    pub silhouettes: Vec<Silhouette>,
    /// Source frame index of each kept silhouette.
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedFrame>,
}

/// Runs every frame through compose → align (by the full-body frame) and
/// filters degenerate results. Output order follows input order.
pub fn process_tracklet(
    frames: &[(LabelMap, InstanceMaskSet)],
    parts: PartSubset,
    config: &PipelineConfig,
) -> Result<TrackletSilhouettes, MaskError> {
    collect(frames, |(map, instances)| process_frame(map, instances, parts, config))
}

/// Variant for pre-existing binary silhouettes paired with torso masks:
/// each frame is aligned by its own silhouette and the aligned output is
/// `silhouette AND NOT torso`.
pub fn process_torso_subtraction(
    frames: &[(BinaryGrid, BinaryGrid)],
    config: &PipelineConfig,
) -> Result<TrackletSilhouettes, MaskError> {
    collect(frames, |(sil, torso)| {
        let frame = match compute_alignment(sil) {
            Ok(f) => f,
            Err(MaskError::EmptySilhouette) => return Ok(Err(DropReason::EmptyFullBody)),
            Err(e) => return Err(e),
        };
        finish(&subtract_torso(sil, torso)?, &frame, config)
    })
}

fn collect<T>(
    frames: &[T],
    mut per_frame: impl FnMut(&T) -> Result<Result<Silhouette, DropReason>, MaskError>,
) -> Result<TrackletSilhouettes, MaskError> {
    if frames.is_empty() {
        return Err(MaskError::EmptyTracklet);
    }
    let mut out = TrackletSilhouettes {
        silhouettes: Vec::new(),
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for (index, f) in frames.iter().enumerate() {
        match per_frame(f)? {
            Ok(sil) => {
                out.silhouettes.push(sil);
                out.kept.push(index);
            }
            Err(reason) => out.dropped.push(DroppedFrame { index, reason }),
        }
    }
    if out.silhouettes.is_empty() {
        return Err(MaskError::AllFramesDropped(frames.len()));
    }
    Ok(out)
}

fn process_frame(
    map: &LabelMap,
    instances: &InstanceMaskSet,
    parts: PartSubset,
    config: &PipelineConfig,
) -> Result<Result<Silhouette, DropReason>, MaskError> {
    let gating;
    let instances = if instances.is_empty() && config.component_gating {
        let ungated = compose_silhouette(map, PartSubset::full(), instances)?;
        gating = InstanceMaskSet::from_components(&ungated);
        &gating
    } else {
        instances
    };
    let full = compose_silhouette(map, PartSubset::full(), instances)?;
    let frame = match compute_alignment(&full) {
        Ok(f) => f,
        Err(MaskError::EmptySilhouette) => return Ok(Err(DropReason::EmptyFullBody)),
        Err(e) => return Err(e),
    };
    let target = if parts == PartSubset::full() {
        full
    } else {
        compose_silhouette(map, parts, instances)?
    };
    finish(&target, &frame, config)
}

fn finish(
    target: &BinaryGrid,
    frame: &super::AlignmentFrame,
    config: &PipelineConfig,
) -> Result<Result<Silhouette, DropReason>, MaskError> {
    match apply_alignment(target, frame) {
        Ok(s) if s.foreground_count() < config.min_foreground => {
            Ok(Err(DropReason::BelowMinForeground(s.foreground_count())))
        }
        Ok(s) => Ok(Ok(s)),
        Err(MaskError::EmptySilhouette) => Ok(Err(DropReason::EmptyTarget)),
        Err(e) => Err(e),
    }
}
