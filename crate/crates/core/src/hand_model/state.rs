use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ModelError, NUM_POSE_JOINTS};
use crate::geometry::{axis_angle_to_matrix, matrix_to_axis_angle};

/// Pose, shape and rigid placement of a hand.
///
/// `pose` holds one axis-angle rotation per articulated joint, expressed in
/// the parent frame; `global_orient` rotates the whole hand about the wrist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub pose: [Vector3<f64>; NUM_POSE_JOINTS],
    pub shape: Vec<f64>,
    pub global_orient: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl HandState {
    /// Zero pose, zero shape (with `shape_dim` coefficients), identity placement.
    pub fn neutral(shape_dim: usize) -> Self {
        HandState {
            pose: [Vector3::zeros(); NUM_POSE_JOINTS],
            shape: vec![0.0; shape_dim],
            global_orient: Vector3::zeros(),
            translation: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = self.pose.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.global_orient.iter().all(|x| x.is_finite());
        if !finite {
            return Err(ModelError::NonFinite("pose"));
        }
        if !self.shape.iter().all(|x| x.is_finite()) {
            return Err(ModelError::NonFinite("shape"));
        }
        if !self.translation.iter().all(|x| x.is_finite()) {
            return Err(ModelError::NonFinite("translation"));
        }
        Ok(())
    }

    /// Squared norm of the flattened pose vector.
    pub fn pose_norm_squared(&self) -> f64 {
        self.pose.iter().map(|v| v.norm_squared()).sum()
    }

    pub fn shape_norm_squared(&self) -> f64 {
        self.shape.iter().map(|b| b * b).sum()
    }

    /// State whose mesh equals this state's mesh moved by `x ↦ rotation·x + offset`.
    ///
    /// `wrist` is the shaped rest position of the root joint, about which the
    /// global orientation acts.
    pub fn rigidly_moved(&self, rotation: &Matrix3<f64>, offset: &Vector3<f64>, wrist: &Vector3<f64>) -> Self {
        let orient = rotation * axis_angle_to_matrix(&self.global_orient);
        let translation = rotation * (wrist + self.translation) + offset - wrist;
        HandState {
            pose: self.pose,
            shape: self.shape.clone(),
            global_orient: matrix_to_axis_angle(&orient),
            translation,
        }
    }
}
