//! Gait-based person re-identification from body-part label maps.
//!
//! The crate covers the whole desk-scale experiment loop:
//!
//! * [`mask`] turns part-label maps into aligned full-body or torso-free
//!   (partial) 64×44 silhouettes.
//! * [`embedder`] is a small set-pooled convolutional network with
//!   horizontal pyramid pooling and hand-written reverse-mode gradients.
//! * [`trainer`] samples p×k×c batches and optimises a batch-all triplet
//!   loss with Adam.
//! * [`retrieval`] computes distances, fusion, cross-camera mAP/CMC and the
//!   CASIA-B cross-view rank-1 matrix.
//! * [`data_io`] holds manifests, image codecs and binary stores.
//! * [`synth`] renders articulated runners whose arm swing hides behind the
//!   torso in frontal view.
//! * [`cli`] wires everything into the `pgait` binary.

pub mod cli;
pub mod data_io;
pub mod embedder;
pub mod mask;
pub mod retrieval;
pub mod synth;
pub mod trainer;
