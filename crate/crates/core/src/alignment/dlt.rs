use nalgebra::{DMatrix, Matrix3, Point2};

use super::{AlignError, Homography};

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizing_transform(pts: &[Point2<f64>]) -> Option<Matrix3<f64>> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts.iter().map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()).sum::<f64>() / n;
    if !(mean_dist > 0.0 && mean_dist.is_finite()) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Homography mapping `src` onto `dst` by the normalized direct linear
/// transform (least squares for more than four points).
pub fn fit_homography_dlt(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Homography, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 4 {
        return Err(AlignError::TooFewPoints(src.len()));
    }
    if src.iter().chain(dst).any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(AlignError::NonFinite);
    }
    let ts = normalizing_transform(src).ok_or(AlignError::Degenerate)?;
    let td = normalizing_transform(dst).ok_or(AlignError::Degenerate)?;
    let norm = |t: &Matrix3<f64>, p: &Point2<f64>| {
        let q = t * p.to_homogeneous();
        (q.x, q.y)
    };

    // Pad to at least 9 rows so the thin SVD exposes the full right null space.
    let rows = (2 * src.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let (x, y) = norm(&ts, s);
        let (u, v) = norm(&td, d);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(AlignError::Degenerate)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(AlignError::Degenerate)?;
    let h = v_t.row(min_idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(AlignError::Degenerate)?;
    Homography::new(td_inv * hn * ts)
}
