use nalgebra::Point2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_homography_dlt, AlignError, Homography};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    /// Symmetric transfer error (pixels) below which a pair is an inlier.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    /// Target probability of drawing at least one all-inlier sample.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            max_iterations: 2000,
            confidence: 0.999,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(AlignError::Config(format!("inlier threshold {} must be positive", self.inlier_threshold)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(AlignError::Config(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if self.max_iterations == 0 {
            return Err(AlignError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub iterations: usize,
}

/// `√(‖H s − d‖² + ‖H⁻¹ d − s‖²)`; infinite when either point maps to infinity.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, s: &Point2<f64>, d: &Point2<f64>) -> f64 {
    match (h.apply(s), h_inv.apply(d)) {
        (Some(fwd), Some(back)) => ((fwd - d).norm_squared() + (back - s).norm_squared()).sqrt(),
        _ => f64::INFINITY,
    }
}

/// Whether any three of the points are (nearly) collinear.
fn has_collinear_triple(pts: &[Point2<f64>]) -> bool {
    let extent = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| (a - b).norm_squared()))
        .fold(0.0f64, f64::max);
    if extent == 0.0 {
        return true;
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let area2 = (pts[j] - pts[i]).perp(&(pts[k] - pts[i]));
                if area2.abs() <= 1e-9 * extent {
                    return true;
                }
            }
        }
    }
    false
}

fn score(h: &Homography, src: &[Point2<f64>], dst: &[Point2<f64>], threshold: f64) -> (Vec<bool>, usize, f64) {
    let h_inv = h.inverse();
    let mut mask = Vec::with_capacity(src.len());
    let mut count = 0;
    let mut error = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let e = symmetric_transfer_error(h, &h_inv, s, d);
        let inlier = e < threshold;
        if inlier {
            count += 1;
            error += e;
        }
        mask.push(inlier);
    }
    (mask, count, error)
}

/// Robust homography from `src → dst` correspondences.
///
/// Four-point DLT hypotheses are drawn with a ChaCha8 generator seeded from
/// the config, skipping samples with three collinear points. The model with
/// the most inliers (ties broken by lower summed error) is refit on its
/// inliers by normalized DLT, and the inlier set is recomputed until it stops
/// changing. The sampling loop ends early once the adaptive iteration bound
/// for the configured confidence is reached.
pub fn estimate_homography(
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
    cfg: &RansacConfig,
) -> Result<RansacResult, AlignError> {
    cfg.validate()?;
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 4 {
        return Err(AlignError::TooFewPoints(n));
    }
    if src.iter().chain(dst).any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(AlignError::NonFinite);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Homography, usize, f64)> = None;
    let mut needed = cfg.max_iterations;
    let mut iterations = 0;
    while iterations < needed.min(cfg.max_iterations) {
        iterations += 1;
        let idx = sample(&mut rng, n, 4).into_vec();
        let s: Vec<_> = idx.iter().map(|&i| src[i]).collect();
        let d: Vec<_> = idx.iter().map(|&i| dst[i]).collect();
        if has_collinear_triple(&s) || has_collinear_triple(&d) {
            continue;
        }
        let Ok(h) = fit_homography_dlt(&s, &d) else {
            continue;
        };
        let (_, count, error) = score(&h, src, dst, cfg.inlier_threshold);
        let better = match &best {
            None => true,
            Some((_, c, e)) => count > *c || (count == *c && error < *e),
        };
        if better {
            best = Some((h, count, error));
            let w = count as f64 / n as f64;
            let p_good = w.powi(4);
            needed = if p_good >= 1.0 {
                0
            } else if p_good <= 0.0 {
                cfg.max_iterations
            } else {
                ((1.0 - cfg.confidence).ln() / (1.0 - p_good).ln()).ceil().max(1.0) as usize
            };
        }
    }
    let Some((mut h, _, _)) = best else {
        return Err(AlignError::Degenerate);
    };

    let (mut mask, mut count, _) = score(&h, src, dst, cfg.inlier_threshold);
    for _ in 0..10 {
        if count < 4 {
            break;
        }
        let (s, d): (Vec<_>, Vec<_>) = src
            .iter()
            .zip(dst)
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|((s, d), _)| (*s, *d))
            .unzip();
        let Ok(refit) = fit_homography_dlt(&s, &d) else {
            break;
        };
        let (new_mask, new_count, _) = score(&refit, src, dst, cfg.inlier_threshold);
        if new_count < count {
            break;
        }
        h = refit;
        let stable = new_mask == mask;
        mask = new_mask;
        count = new_count;
        if stable {
            break;
        }
    }
    Ok(RansacResult {
        homography: h,
        inliers: mask,
        inlier_count: count,
        iterations,
    })
}
