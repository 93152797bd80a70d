//! Hand self-occlusion measurement, pose fitting, dorsal alignment and the
//! evaluation statistics used to study egocentric hand-pose data.

pub mod alignment;
pub mod camera;
pub mod features;
pub mod fitting;
pub mod geometry;
pub mod hand_model;
pub mod metrics;
pub mod occlusion;
pub mod pipeline;
pub mod stats;

pub use camera::{CameraRig, Intrinsics};
pub use hand_model::{Finger, HandMesh, HandPart, HandState, PartMap, RiggedHandTemplate};
pub use occlusion::{RasterConfig, VisibilityReport, VisibilityThresholds};
