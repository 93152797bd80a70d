//! Self-occlusion measurement: backface culling, Z-buffer rasterization and
//! per-part visible surface area.

mod raster;
mod report;

pub use raster::{backface_filter, rasterize_zbuffer, RasterResult};
pub use report::{
    dataset_occlusion_stats, scene_visibility, visibility_report, DatasetOcclusionStats, VisibilityReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::StatsError;

/// Scaled finger visibility at or below which a finger counts as fully occluded.
pub const OCCLUDED_THRESHOLD: f64 = 0.10;
/// Scaled finger visibility above which a finger counts as fully visible.
pub const VISIBLE_THRESHOLD: f64 = 0.90;
/// Largest fraction of a finger's surface that can face the camera at once.
pub const FINGER_VISIBLE_SCALE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum OcclusionError {
    #[error("raster size must be positive, got {0}x{1}")]
    RasterSize(usize, usize),
    #[error("invalid depth epsilon {0}")]
    DepthEpsilon(f64),
    #[error("invalid visibility thresholds: {0}")]
    Thresholds(String),
    #[error("face labels cover {labels} faces but the mesh has {faces}")]
    LabelCount { labels: usize, faces: usize },
    #[error("no visibility reports to aggregate")]
    Empty,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Z-buffer resolution over the mesh's projected bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterConfig {
    pub width: usize,
    pub height: usize,
    /// Depth slack (meters) within which a face still wins a pixel.
    pub depth_epsilon: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            depth_epsilon: 1e-5,
        }
    }
}

impl RasterConfig {
    pub fn square(size: usize) -> Self {
        Self {
            width: size,
            height: size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OcclusionError> {
        if self.width == 0 || self.height == 0 {
            return Err(OcclusionError::RasterSize(self.width, self.height));
        }
        if !(self.depth_epsilon >= 0.0 && self.depth_epsilon.is_finite()) {
            return Err(OcclusionError::DepthEpsilon(self.depth_epsilon));
        }
        Ok(())
    }
}

/// Whether the occlusion thresholds apply to scaled or raw finger fractions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Threshold `min(visible / (area · finger_scale), 1)`.
    #[default]
    Scaled,
    /// Threshold `visible / area` directly.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityThresholds {
    pub occluded: f64,
    pub visible: f64,
    pub finger_scale: f64,
    pub mode: ThresholdMode,
}

impl Default for VisibilityThresholds {
    fn default() -> Self {
        Self {
            occluded: OCCLUDED_THRESHOLD,
            visible: VISIBLE_THRESHOLD,
            finger_scale: FINGER_VISIBLE_SCALE,
            mode: ThresholdMode::Scaled,
        }
    }
}

impl VisibilityThresholds {
    pub fn validate(&self) -> Result<(), OcclusionError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.occluded) || !unit(self.visible) || self.occluded >= self.visible {
            return Err(OcclusionError::Thresholds(format!(
                "need 0 <= occluded ({}) < visible ({}) <= 1",
                self.occluded, self.visible
            )));
        }
        if !(self.finger_scale > 0.0 && self.finger_scale <= 1.0) {
            return Err(OcclusionError::Thresholds(format!("finger scale {} outside (0, 1]", self.finger_scale)));
        }
        Ok(())
    }
}
