//! Benchmark data: toy classification, binary-glyph occupancy grids and 2D SDF
//! shapes.

mod dataset;
mod glyph;
mod grid;
mod idx;
mod sdf;
mod toy;

pub use dataset::{
    check_shared_oracle, Split, TaskDataset, TaskKind, DATASET_KIND, DATASET_VERSION,
};
pub use glyph::{seven_glyph, seven_glyphs, GLYPH_SIZE};
pub use grid::{
    apply_corruption, erode4, occupancy_dataset, rotate_nearest, Corruption, CorruptionSpec,
    GridShape,
};
pub use idx::{
    binarize, encode_idx_images, encode_idx_labels, load_idx_images, parse_idx_images,
    parse_idx_labels, BINARIZE_THRESHOLD, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use sdf::{
    gen_sdf_shapes, point_in_polygon, random_boundary, raster_sdf, Boundary, SdfConfig, SdfShape,
    SdfSplits, ShapeFamily,
};
pub use toy::{gen_toy_classification, toy_boundary, ToyConfig, ToySplits};

/// Short stable hash (first 16 hex digits of SHA-256) of a configuration string.
pub fn config_hash(text: &str) -> String {
    crate::textdoc::sha256_hex(text.as_bytes())[..16].to_string()
}
