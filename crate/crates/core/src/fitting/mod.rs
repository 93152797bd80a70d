//! Fitting hand states to 3D keypoints or motion-capture markers by damped
//! Gauss–Newton (Levenberg–Marquardt) least squares.

mod problem;
mod solver;

pub use problem::{objective_keypoints, objective_markers, FitProblem};
pub use solver::fit;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use crate::hand_model::{HandState, ModelError, NUM_KEYPOINTS};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid fit config: {0}")]
    Config(String),
    #[error("invalid targets: {0}")]
    Targets(String),
    #[error("objective is not finite at the initial state")]
    NonFiniteInit,
}

/// 21 keypoint targets in meters with optional per-point confidence in [0, 1].
/// Points with zero confidence may be NaN and are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointTargets {
    pub points: [Vector3<f64>; NUM_KEYPOINTS],
    pub confidence: Option<[f64; NUM_KEYPOINTS]>,
}

impl KeypointTargets {
    pub fn new(points: [Vector3<f64>; NUM_KEYPOINTS]) -> Self {
        Self {
            points,
            confidence: None,
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.confidence.map_or(1.0, |c| c[i])
    }

    pub fn validate(&self) -> Result<(), FitError> {
        for i in 0..NUM_KEYPOINTS {
            let w = self.weight(i);
            if !(0.0..=1.0).contains(&w) {
                return Err(FitError::Targets(format!("confidence {w} of keypoint {i} outside [0, 1]")));
            }
            if w > 0.0 && !self.points[i].iter().all(|x| x.is_finite()) {
                return Err(FitError::Targets(format!("keypoint {i} is not finite")));
            }
        }
        Ok(())
    }
}

/// Marker targets attached to template vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerTargets {
    pub points: Vec<Vector3<f64>>,
    pub vertex_ids: Vec<usize>,
}

/// Fewest markers that still pin down a rigid placement comfortably.
pub const MIN_MARKERS: usize = 6;

impl MarkerTargets {
    pub fn validate(&self, vertex_count: usize) -> Result<(), FitError> {
        if self.points.len() != self.vertex_ids.len() {
            return Err(FitError::Targets(format!(
                "{} marker points but {} vertex ids",
                self.points.len(),
                self.vertex_ids.len()
            )));
        }
        if self.points.len() < MIN_MARKERS {
            return Err(FitError::Targets(format!("need at least {MIN_MARKERS} markers, got {}", self.points.len())));
        }
        if let Some(&v) = self.vertex_ids.iter().find(|&&v| v >= vertex_count) {
            return Err(FitError::Model(ModelError::IndexOutOfRange(format!(
                "marker vertex {v} (template has {vertex_count})"
            ))));
        }
        if self.points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(FitError::Targets("marker point is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitTargets {
    Keypoints(KeypointTargets),
    Markers(MarkerTargets),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JacobianMode {
    CentralDifference { step: f64 },
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// λ_θ on `‖θ‖²` (rad²), against data terms in m².
    pub reg_pose_weight: f64,
    /// λ_β on `‖β‖²`; unused for marker fits.
    pub reg_shape_weight: f64,
    pub max_iterations: usize,
    /// Stop when the accepted step's norm falls below this.
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the objective by less than this
    /// fraction of its previous value.
    pub residual_tolerance: f64,
    pub damping_init: f64,
    pub jacobian: JacobianMode,
    /// Before iterating, align the initial state rigidly to the targets
    /// attached to the root (wrist and knuckles, or wrist-bound markers).
    pub rigid_init: bool,
    /// Number of warm-up stages with regularizers scaled by decreasing powers
    /// of ten before the final solve.
    pub continuation: u32,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            reg_pose_weight: 1e-3,
            reg_shape_weight: 1e-3,
            max_iterations: 100,
            step_tolerance: 1e-10,
            residual_tolerance: 1e-12,
            damping_init: 1e-3,
            jacobian: JacobianMode::CentralDifference { step: 1e-6 },
            rigid_init: true,
            continuation: 3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |msg: String| Err(FitError::Config(msg));
        if !(self.reg_pose_weight >= 0.0 && self.reg_shape_weight >= 0.0) {
            return bad("regularizer weights must be non-negative".into());
        }
        if !(self.step_tolerance > 0.0 && self.residual_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.damping_init > 0.0 && self.damping_init.is_finite()) {
            return bad(format!("damping_init {} must be positive", self.damping_init));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if let JacobianMode::CentralDifference { step } = self.jacobian {
            if !(step > 0.0 && step.is_finite()) {
                return bad(format!("difference step {step} must be positive"));
            }
        }
        Ok(())
    }
}

/// One outer solver iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Continuation stage, 0 for the most regularized.
    pub stage: usize,
    pub iteration: usize,
    pub objective: f64,
    pub damping: f64,
    pub step_norm: f64,
    pub rejected_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub state: HandState,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
}

impl FitResult {
    /// The iteration log as CSV.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("stage,iteration,objective,damping,step_norm,rejected_steps\n");
        for r in &self.log {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{}",
                r.stage,
                r.iteration, r.objective, r.damping, r.step_norm, r.rejected_steps
            );
        }
        out
    }
}
