use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{MetricError, MM_PER_M};
use crate::geometry::{axis_angle_to_matrix, euler_xyz_intrinsic, wrap_angle};
use crate::hand_model::{keypoints, Finger, HandMesh, HandState, RiggedHandTemplate, NUM_KEYPOINTS};

/// A predicted series, its ground truth and their RMS difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesComparison {
    pub predicted: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub rmse: f64,
}

fn compare(predicted: Vec<f64>, ground_truth: Vec<f64>, diff: impl Fn(f64, f64) -> f64) -> Result<SeriesComparison, MetricError> {
    if predicted.len() != ground_truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), ground_truth.len()));
    }
    if predicted.is_empty() {
        return Err(MetricError::Empty);
    }
    let ms = predicted
        .iter()
        .zip(&ground_truth)
        .map(|(&p, &g)| diff(p, g).powi(2))
        .sum::<f64>()
        / predicted.len() as f64;
    Ok(SeriesComparison {
        predicted,
        ground_truth,
        rmse: ms.sqrt(),
    })
}

/// Flexion (intrinsic X Euler angle, degrees) of a finger's knuckle joint in
/// the template's joint frame, one value per state.
pub fn tap_angles_deg(template: &RiggedHandTemplate, states: &[HandState], finger: Finger) -> Result<Vec<f64>, MetricError> {
    if finger == Finger::Thumb {
        return Err(MetricError::UnsupportedFinger(finger));
    }
    let joint = template.mcp_joint(finger).ok_or(MetricError::NoKnuckleJoint(finger))?;
    if joint == 0 {
        return Err(MetricError::NoKnuckleJoint(finger));
    }
    let frame = template.joint_frame(joint);
    Ok(states
        .iter()
        .map(|s| {
            let local = frame.transpose() * axis_angle_to_matrix(&s.pose[joint - 1]) * frame;
            euler_xyz_intrinsic(&local)[0].to_degrees()
        })
        .collect())
}

/// Knuckle flexion series for prediction and ground truth; differences are
/// wrapped into `(−180°, 180°]` before the RMS.
pub fn tap_angle_series(
    template: &RiggedHandTemplate,
    predicted: &[HandState],
    ground_truth: &[HandState],
    finger: Finger,
) -> Result<SeriesComparison, MetricError> {
    if predicted.len() != ground_truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), ground_truth.len()));
    }
    let p = tap_angles_deg(template, predicted, finger)?;
    let g = tap_angles_deg(template, ground_truth, finger)?;
    compare(p, g, |a, b| wrap_angle((a - b).to_radians()).to_degrees())
}

/// Fingertip-to-thumb-tip distance in mm per frame of 21-point keypoints (metres).
pub fn pinch_distances_mm(frames: &[[Vector3<f64>; NUM_KEYPOINTS]], finger: Finger) -> Result<Vec<f64>, MetricError> {
    if !matches!(finger, Finger::Index | Finger::Middle | Finger::Ring) {
        return Err(MetricError::UnsupportedFinger(finger));
    }
    let (tip, thumb) = (finger.tip_keypoint(), Finger::Thumb.tip_keypoint());
    Ok(frames.iter().map(|k| (k[tip] - k[thumb]).norm() * MM_PER_M).collect())
}

pub fn pinch_distance_series(predicted: &[HandMesh], ground_truth: &[HandMesh], finger: Finger) -> Result<SeriesComparison, MetricError> {
    if predicted.len() != ground_truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), ground_truth.len()));
    }
    let kp = |meshes: &[HandMesh]| meshes.iter().map(keypoints).collect::<Vec<_>>();
    let p = pinch_distances_mm(&kp(predicted), finger)?;
    let g = pinch_distances_mm(&kp(ground_truth), finger)?;
    compare(p, g, |a, b| a - b)
}
