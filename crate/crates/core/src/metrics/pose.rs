use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{pa_mpjpe_mm, MetricError};
use crate::geometry::{axis_angle_to_matrix, euler_xyz_intrinsic, geodesic_angle, wrap_angle};
use crate::hand_model::{HandState, NUM_KEYPOINTS, NUM_POSE_JOINTS};

/// Predicted and ground-truth hand, optionally with their 21 keypoints (metres).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosePair {
    pub predicted: HandState,
    pub ground_truth: HandState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_keypoints: Option<[Vector3<f64>; NUM_KEYPOINTS]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_keypoints: Option<[Vector3<f64>; NUM_KEYPOINTS]>,
}

impl PosePair {
    pub fn new(predicted: HandState, ground_truth: HandState) -> Self {
        Self {
            predicted,
            ground_truth,
            predicted_keypoints: None,
            ground_truth_keypoints: None,
        }
    }

    pub fn with_keypoints(mut self, predicted: [Vector3<f64>; NUM_KEYPOINTS], ground_truth: [Vector3<f64>; NUM_KEYPOINTS]) -> Self {
        self.predicted_keypoints = Some(predicted);
        self.ground_truth_keypoints = Some(ground_truth);
        self
    }

    fn keypoints(&self) -> Option<(&[Vector3<f64>; NUM_KEYPOINTS], &[Vector3<f64>; NUM_KEYPOINTS])> {
        Some((self.predicted_keypoints.as_ref()?, self.ground_truth_keypoints.as_ref()?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpjaeMode {
    /// Angle of the relative rotation between predicted and true joint rotations.
    #[default]
    Geodesic,
    /// Mean absolute difference of the intrinsic X-Y-Z Euler angles.
    EulerComponents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpjaeResult {
    pub per_joint_deg: [f64; NUM_POSE_JOINTS],
    pub mean_deg: f64,
}

pub fn mpjae(pair: &PosePair) -> MpjaeResult {
    mpjae_with(pair, MpjaeMode::Geodesic)
}

pub fn mpjae_with(pair: &PosePair, mode: MpjaeMode) -> MpjaeResult {
    let per_joint_deg = std::array::from_fn(|j| {
        let p = axis_angle_to_matrix(&pair.predicted.pose[j]);
        let g = axis_angle_to_matrix(&pair.ground_truth.pose[j]);
        match mode {
            MpjaeMode::Geodesic => geodesic_angle(&p, &g).to_degrees(),
            MpjaeMode::EulerComponents => {
                let (ep, eg) = (euler_xyz_intrinsic(&p), euler_xyz_intrinsic(&g));
                (0..3).map(|k| wrap_angle(ep[k] - eg[k]).abs()).sum::<f64>().to_degrees() / 3.0
            }
        }
    });
    let mean_deg = per_joint_deg.iter().sum::<f64>() / NUM_POSE_JOINTS as f64;
    MpjaeResult { per_joint_deg, mean_deg }
}

/// `‖J − Ĵ‖₁ + ‖θ − θ̂‖²₂` over the 21 keypoints and 45 pose parameters.
pub fn supervision_loss(pair: &PosePair) -> Result<f64, MetricError> {
    let (j, j_hat) = pair.keypoints().ok_or(MetricError::MissingKeypoints)?;
    let l1: f64 = j.iter().zip(j_hat).map(|(a, b)| (a - b).abs().sum()).sum();
    let l2: f64 = pair
        .predicted
        .pose
        .iter()
        .zip(&pair.ground_truth.pose)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(l1 + l2)
}

/// Per-frame evaluation of one pose pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpjae_per_joint_deg: [f64; NUM_POSE_JOINTS],
    pub mpjae_deg: f64,
    pub pa_mpjpe_mm: Option<f64>,
    pub loss: Option<f64>,
}

impl MetricReport {
    /// MPJAE always; PA-MPJPE and the supervision loss when keypoints are present.
    pub fn evaluate(pair: &PosePair, mode: MpjaeMode) -> Result<Self, MetricError> {
        let m = mpjae_with(pair, mode);
        let (pa, loss) = match pair.keypoints() {
            Some((p, g)) => (Some(pa_mpjpe_mm(p, g)?), Some(supervision_loss(pair)?)),
            None => (None, None),
        };
        Ok(Self {
            mpjae_per_joint_deg: m.per_joint_deg,
            mpjae_deg: m.mean_deg,
            pa_mpjpe_mm: pa,
            loss,
        })
    }
}
