use nalgebra::{Matrix3, Vector3};

use super::{MetricError, MM_PER_M};
use crate::geometry::procrustes;

fn check_pair(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<(), MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.len() < 3 {
        return Err(MetricError::TooFewPoints(pred.len()));
    }
    Ok(())
}

/// Rejects coincident or collinear sets by the spread of the scatter matrix.
fn check_spread(pts: &[Vector3<f64>], which: &'static str) -> Result<(), MetricError> {
    let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let scatter = pts.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    });
    let mut ev: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= 1e-12 * ev[0] {
        return Err(MetricError::Degenerate(which));
    }
    Ok(())
}

/// Mean per-point distance in mm, without alignment. Inputs in metres.
pub fn mpjpe_mm(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::TooFewPoints(0));
    }
    let total: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g).norm()).sum();
    Ok(total / pred.len() as f64 * MM_PER_M)
}

/// Mean per-point distance in mm after the least-squares similarity
/// (rotation with det = +1, translation, uniform scale) maps `pred` onto `gt`.
pub fn pa_mpjpe_mm(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, MetricError> {
    check_pair(pred, gt)?;
    check_spread(gt, "ground truth")?;
    check_spread(pred, "prediction")?;
    let s = procrustes(pred, gt, None, true).ok_or(MetricError::Degenerate("alignment failed"))?;
    let total: f64 = pred.iter().zip(gt).map(|(p, g)| (s.apply(p) - g).norm()).sum();
    Ok(total / pred.len() as f64 * MM_PER_M)
}
