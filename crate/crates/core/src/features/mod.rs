//! Dense feature grids and the deterministic delta stream computed from a
//! reference grid `f0` and a target grid `ft`.

mod grid;
mod ops;

pub use grid::{FeatureGrid, GridSource, FGRID_VERSION};
pub use ops::{cosine_map, feature_delta, fuse_change_tensor, similarity_to_image, SimilarityMap};

use thiserror::Error;

pub const DEFAULT_PATCH_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("grid dimensions must be positive, got {height}×{width}×{channels}")]
    EmptyGrid {
        height: usize,
        width: usize,
        channels: usize,
    },
    #[error("expected {expected} values, got {found}")]
    DataLength { expected: usize, found: usize },
    #[error("non-finite feature value at index {0}")]
    NonFinite(usize),
    #[error("patch size must be positive")]
    PatchSize,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("similarity value {0} outside [-1, 1]")]
    SimilarityRange(f64),
    #[error("malformed FGRID data: {0}")]
    Format(String),
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
