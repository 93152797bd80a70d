use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use super::AlignError;

/// Smallest `|det|` of a normalized matrix accepted as invertible.
const MIN_DET: f64 = 1e-12;

/// A plane projective transform acting on pixel coordinates.
///
/// Stored normalized: divided by `h[2][2]` when that entry is not tiny,
/// otherwise scaled to unit Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, AlignError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(AlignError::NonFinite);
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(AlignError::Singular);
        }
        let m = if m[(2, 2)].abs() > 1e-12 * norm {
            m / m[(2, 2)]
        } else {
            m / norm
        };
        if m.determinant().abs() <= MIN_DET {
            return Err(AlignError::Singular);
        }
        Ok(Homography(m))
    }

    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    /// `(x, y) ↦ (sx·x + tx, sy·y + ty)`.
    pub fn scale_translation(sx: f64, sy: f64, tx: f64, ty: f64) -> Result<Self, AlignError> {
        Self::new(Matrix3::new(sx, 0.0, tx, 0.0, sy, ty, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is checked on construction.
        Homography::new(self.0.try_inverse().expect("homography is invertible")).expect("inverse is invertible")
    }

    /// Maps one point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: &Point2<f64>) -> Option<Point2<f64>> {
        let q = self.0 * Vector3::new(p.x, p.y, 1.0);
        let scale = q.x.abs().max(q.y.abs()).max(1.0);
        if q.z.abs() <= 1e-12 * scale || !q.z.is_finite() {
            return None;
        }
        Some(Point2::new(q.x / q.z, q.y / q.z))
    }
}

/// `a * b` applies `b` first, then `a`.
impl Mul for Homography {
    type Output = Homography;

    fn mul(self, rhs: Homography) -> Homography {
        Homography::new(self.0 * rhs.0).expect("product of invertible homographies is invertible")
    }
}

/// Applies `h` to every point; points mapped to infinity come back as `None`.
pub fn warp_points(h: &Homography, pts: &[Point2<f64>]) -> Vec<Option<Point2<f64>>> {
    pts.iter().map(|p| h.apply(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h_strategy() -> impl Strategy<Value = Homography> {
        prop::array::uniform8(-1.0f64..1.0).prop_filter_map("singular", |v| {
            let m = Matrix3::new(
                1.0 + 0.3 * v[0],
                0.3 * v[1],
                20.0 * v[2],
                0.3 * v[3],
                1.0 + 0.3 * v[4],
                20.0 * v[5],
                1e-3 * v[6],
                1e-3 * v[7],
                1.0,
            );
            Homography::new(m).ok()
        })
    }

    #[test]
    fn identity_and_translation() {
        let p = Point2::new(3.5, -2.0);
        assert_eq!(Homography::identity().apply(&p), Some(p));
        assert_eq!(Homography::translation(1.0, 2.0).apply(&p), Some(Point2::new(4.5, 0.0)));
    }

    #[test]
    fn normalization() {
        let h = Homography::new(Matrix3::identity() * 4.0).unwrap();
        assert_eq!(h.matrix()[(2, 2)], 1.0);
        assert!(Homography::new(Matrix3::zeros()).is_err());
        let rank2 = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(Homography::new(rank2).is_err());
    }

    #[test]
    fn point_at_infinity_is_flagged() {
        // Third row (1, 0, 0): w = x, so x = 0 maps to infinity.
        let h = Homography::new(Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0)).unwrap();
        let out = warp_points(&h, &[Point2::new(0.0, 5.0), Point2::new(2.0, 5.0)]);
        assert!(out[0].is_none());
        assert_eq!(out[1], Some(Point2::new(2.5, 0.5)));
    }

    proptest! {
        #[test]
        fn matches_homogeneous_oracle(h in h_strategy(), x in -100.0f64..100.0, y in -100.0f64..100.0) {
            let m = h.matrix();
            let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
            let ex = (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / w;
            let ey = (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / w;
            let p = h.apply(&Point2::new(x, y)).unwrap();
            prop_assert!((p.x - ex).abs() < 1e-9 * ex.abs().max(1.0));
            prop_assert!((p.y - ey).abs() < 1e-9 * ey.abs().max(1.0));
        }

        #[test]
        fn composition(h1 in h_strategy(), h2 in h_strategy(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = Point2::new(x, y);
            let two_step = h2.apply(&h1.apply(&p).unwrap()).unwrap();
            let one_step = (h2 * h1).apply(&p).unwrap();
            prop_assert!((two_step - one_step).norm() < 1e-9 * two_step.coords.norm().max(1.0));
        }

        #[test]
        fn inverse_round_trip(h in h_strategy(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = Point2::new(x, y);
            let back = h.inverse().apply(&h.apply(&p).unwrap()).unwrap();
            prop_assert!((back - p).norm() < 1e-9);
        }
    }
}
