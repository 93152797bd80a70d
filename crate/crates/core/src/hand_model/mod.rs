//! Parametric linear-blend-skinned hand.
//!
//! A [`RiggedHandTemplate`] holds the rest mesh and rig; [`pose_mesh`] turns a
//! [`HandState`] into a posed [`HandMesh`] with 16 skeleton joints and the
//! 21-point keypoint layout (wrist, then four points per finger from thumb to
//! pinky).

mod parts;
mod skinning;
mod state;
pub mod synthetic;
mod template;

pub use parts::{Finger, HandPart, PartMap};
pub use skinning::{face_areas, keypoints, part_areas, pose_mesh, vertex_derivatives, HandMesh, PoseDerivatives};
pub use state::HandState;
pub use template::{KeypointSource, RiggedHandTemplate, TemplateData, KEYPOINT_NAMES, TEMPLATE_FORMAT};

use thiserror::Error;

/// Skeleton joints: the wrist root plus 15 articulated joints.
pub const NUM_JOINTS: usize = 16;
/// Articulated joints carried by the pose vector.
pub const NUM_POSE_JOINTS: usize = 15;
/// Keypoints in the wrist + 4-per-finger layout.
pub const NUM_KEYPOINTS: usize = 21;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported template format {found:?} (expected {expected:?})")]
    Format { found: String, expected: String },
    #[error("weights not normalized: vertex {vertex} sums to {sum}")]
    WeightsNotNormalized { vertex: usize, sum: f64 },
    #[error("negative skinning weight at vertex {vertex}, joint {joint}")]
    NegativeWeight { vertex: usize, joint: usize },
    #[error("hierarchy not a tree: {0}")]
    NotATree(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid template: {0}")]
    Invalid(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
