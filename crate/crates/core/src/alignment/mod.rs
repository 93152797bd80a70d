//! Reference-to-target dorsal alignment: homographies from 2D keypoint
//! correspondences, image warping and fixed-size dorsal crops.

mod crop;
mod dlt;
mod homography;
mod ransac;
pub mod raster;

pub use crop::{crop_transform, dorsal_crop, CropConfig, DorsalCrop, CROP_SIZE, DORSAL_KEYPOINTS};
pub use dlt::fit_homography_dlt;
pub use homography::{warp_points, Homography};
pub use ransac::{estimate_homography, symmetric_transfer_error, RansacConfig, RansacResult};
pub use raster::{warp_grid, Raster};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("source and destination differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every sampled correspondence set was degenerate")]
    Degenerate,
    #[error("homography is singular")]
    Singular,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate crop box: {0}")]
    DegenerateBox(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image: {0}")]
    Format(String),
}
