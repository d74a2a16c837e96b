//! Manifests, raster codecs, binary stores and dataset-layout builders.

pub(crate) mod binary;
mod casia;
mod image_io;
mod manifest;
mod store;

pub use binary::atomic_write;
pub use casia::{build_casia_manifest, casia_sequences, CasiaLayoutError, CASIA_TRAIN_IDS, CASIA_VIEWS};
pub use image_io::{
    decode_pgm, encode_pgm, read_gray, read_label_map, read_mask, read_silhouette, write_gray, write_label_map,
    write_mask, write_silhouette, GrayImage, ImageError,
};
pub use manifest::{
    manifest_to_string, parse_manifest, parse_manifest_str, write_manifest, Condition, ManifestError, Split,
    TrackletRecord,
};
pub use store::{
    decode_store, encode_store, read_embeddings, store_header, write_embeddings, StoreEntry, StoreError, STORE_MAGIC,
    STORE_VERSION,
};
