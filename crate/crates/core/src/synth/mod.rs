//! Seeded articulated walkers rendered as part-label maps.
//!
//! Walkers are stick figures fleshed out with capsules and painted far to
//! near. In frontal view the torso covers whichever arm is swung back, so
//! arm motion is almost invisible in the full-body union but survives in
//! torso-free silhouettes.

mod dataset;
mod identity;
mod render;

pub use dataset::{gen_dataset, person_id, render_dataset, DatasetSpec, SynthTracklet, MANIFEST_NAME};
pub use identity::{gen_identity, IdentityParams};
pub use render::{render_sequence, CameraSpec, View, CANVAS_HEIGHT, CANVAS_WIDTH};

use thiserror::Error;

use crate::data_io::{ImageError, ManifestError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("figure leaves the canvas in frame {frame}")]
    InvalidCanvas { frame: usize },
    #[error("sequence needs at least one frame")]
    NoFrames,
    #[error("identity parameters out of range")]
    InvalidIdentity,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}
