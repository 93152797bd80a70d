//! Pose and keypoint evaluation metrics.

mod aggregate;
mod points;
mod pose;
mod series;

pub use aggregate::{mean_sd_across_groups, GroupedMeanSd};
pub use points::{mpjpe_mm, pa_mpjpe_mm};
pub use pose::{supervision_loss, mpjae, mpjae_with, MetricReport, MpjaeMode, MpjaeResult, PosePair};
pub use series::{pinch_distance_series, pinch_distances_mm, tap_angle_series, tap_angles_deg, SeriesComparison};

use thiserror::Error;

use crate::hand_model::{Finger, ModelError};

/// Metres to millimetres.
pub const MM_PER_M: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point sets differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point set: {0}")]
    Degenerate(&'static str),
    #[error("keypoints missing from pose pair")]
    MissingKeypoints,
    #[error("finger {0} not supported here")]
    UnsupportedFinger(Finger),
    #[error("template has no joint for the {0} knuckle")]
    NoKnuckleJoint(Finger),
    #[error("empty series")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}
