//! Rotation helpers shared by the skinning, fitting and metric code.
//!
//! Rotations are passed around as axis-angle vectors (direction = axis,
//! norm = angle in radians) and converted to 3×3 matrices on demand.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Below this angle the trigonometric coefficients switch to Taylor series.
const SMALL_ANGLE: f64 = 1e-3;

/// Cross-product matrix `[v]×`, so that `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Coefficients `(a, b)` of `R = I + a [v]× + b [v]×²`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

/// `(da/dθ)/θ` and `(db/dθ)/θ` for the Rodrigues coefficients.
fn rodrigues_coefficient_slopes(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (-1.0 / 3.0 + t2 / 30.0, -1.0 / 12.0 + t2 / 180.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t3 = theta * theta * theta;
        ((theta * c - s) / t3, (theta * s - 2.0 * (1.0 - c)) / (t3 * theta))
    }
}

/// Rotation matrix of an axis-angle vector (Rodrigues' formula).
pub fn axis_angle_to_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b) = rodrigues_coefficients(v.norm());
    let k = skew(v);
    Matrix3::identity() + k * a + k * k * b
}

/// Partial derivatives `∂R/∂v_i` of [`axis_angle_to_matrix`] for `i = 0, 1, 2`.
pub fn axis_angle_derivatives(v: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta = v.norm();
    let (a, b) = rodrigues_coefficients(theta);
    let (da, db) = rodrigues_coefficient_slopes(theta);
    let k = skew(v);
    let k2 = k * k;
    std::array::from_fn(|i| {
        let e = skew(&Vector3::ith(i, 1.0));
        e * a + (e * k + k * e) * b + (k * da + k2 * db) * v[i]
    })
}

/// Axis-angle vector of a rotation matrix (logarithm map).
pub fn matrix_to_axis_angle(m: &Matrix3<f64>) -> Vector3<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m)).scaled_axis()
}

/// Angle in radians of the relative rotation `aᵀ b`.
///
/// Uses the quaternion half-angle form, which stays accurate near zero where
/// `acos((tr - 1) / 2)` loses about half the significant digits.
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rel));
    2.0 * q.imag().norm().atan2(q.scalar().abs())
}

/// Intrinsic X-Y-Z Euler angles `(x, y, z)` with `m = Rx(x) · Ry(y) · Rz(z)`.
pub fn euler_xyz_intrinsic(m: &Matrix3<f64>) -> [f64; 3] {
    let y = m[(0, 2)].atan2((m[(1, 2)].powi(2) + m[(2, 2)].powi(2)).sqrt());
    let x = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let z = (-m[(0, 1)]).atan2(m[(0, 0)]);
    [x, y, z]
}

/// Wraps an angle in radians into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Checks `m` is a proper rotation: `mᵀm = I` and `det m = +1` within `tol`.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    let ortho = (m.transpose() * m - Matrix3::identity()).amax();
    ortho <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Similarity transform `x ↦ scale · rotation · x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }
}

/// Weighted least-squares alignment of `source` onto `target` (Umeyama),
/// with a determinant correction so the rotation is proper. With
/// `with_scale = false` the scale is fixed at 1 (Kabsch).
///
/// Returns `None` when fewer than one point carries weight or the inputs
/// differ in length.
pub fn procrustes(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: Option<&[f64]>,
    with_scale: bool,
) -> Option<Similarity> {
    if source.len() != target.len() || weights.is_some_and(|w| w.len() != source.len()) {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..source.len()).map(w).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut mu_s = Vector3::zeros();
    let mut mu_t = Vector3::zeros();
    for i in 0..source.len() {
        mu_s += source[i] * w(i);
        mu_t += target[i] * w(i);
    }
    mu_s /= total;
    mu_t /= total;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for i in 0..source.len() {
        let a = source[i] - mu_s;
        let b = target[i] - mu_t;
        cov += b * a.transpose() * w(i);
        var_s += a.norm_squared() * w(i);
    }
    cov /= total;
    var_s /= total;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        d.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&d) * v_t;
    let scale = if with_scale && var_s > 0.0 {
        svd.singular_values.dot(&d) / var_s
    } else {
        1.0
    };
    Some(Similarity {
        scale,
        rotation,
        translation: mu_t - rotation * mu_s * scale,
    })
}
