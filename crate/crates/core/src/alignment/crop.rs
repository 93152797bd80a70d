use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::{warp_grid, AlignError, Homography, Raster};

pub const CROP_SIZE: usize = 384;

/// Wrist and the five MCP knuckles.
pub const DORSAL_KEYPOINTS: [usize; 6] = [0, 2, 5, 9, 13, 17];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    /// Padding added on every side, as a fraction of the bbox diagonal.
    pub margin: f64,
    pub size: usize,
    pub keypoints: Vec<usize>,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            margin: 0.15,
            size: CROP_SIZE,
            keypoints: DORSAL_KEYPOINTS.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DorsalCrop {
    pub raster: Raster,
    /// Image pixel coordinates to crop pixel coordinates.
    pub transform: Homography,
}

/// Crop transform for the dorsal keypoints of one frame: the padded box
/// `[x0, x1] × [y0, y1]` maps onto `[0, size−1]²`.
pub fn crop_transform(keypoints2d: &[Point2<f64>], cfg: &CropConfig) -> Result<Homography, AlignError> {
    if !(cfg.margin >= 0.0 && cfg.margin.is_finite()) {
        return Err(AlignError::Config(format!("margin {} must be non-negative", cfg.margin)));
    }
    if cfg.size < 2 {
        return Err(AlignError::Config(format!("crop size {} below 2", cfg.size)));
    }
    if cfg.keypoints.is_empty() {
        return Err(AlignError::Config("no crop keypoints selected".into()));
    }
    let mut pts = Vec::with_capacity(cfg.keypoints.len());
    for &k in &cfg.keypoints {
        let p = keypoints2d
            .get(k)
            .ok_or_else(|| AlignError::Config(format!("keypoint {k} missing ({} given)", keypoints2d.len())))?;
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(AlignError::NonFinite);
        }
        pts.push(*p);
    }
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let (w, h) = (x1 - x0, y1 - y0);
    if w <= 0.0 || h <= 0.0 {
        return Err(AlignError::DegenerateBox(format!("{w} × {h} px")));
    }
    let pad = cfg.margin * w.hypot(h);
    let (x0, y0, x1, y1) = (x0 - pad, y0 - pad, x1 + pad, y1 + pad);
    let s = (cfg.size - 1) as f64;
    let (sx, sy) = (s / (x1 - x0), s / (y1 - y0));
    Homography::scale_translation(sx, sy, -sx * x0, -sy * y0)
}

/// Resamples the padded dorsal bounding box of `grid` to `size × size`.
pub fn dorsal_crop(keypoints2d: &[Point2<f64>], grid: &Raster, cfg: &CropConfig) -> Result<DorsalCrop, AlignError> {
    if grid.is_empty() {
        return Err(AlignError::Config("empty input raster".into()));
    }
    let transform = crop_transform(keypoints2d, cfg)?;
    let (w, h) = ((grid.width - 1) as f64, (grid.height - 1) as f64);
    if cfg
        .keypoints
        .iter()
        .any(|&k| !(0.0..=w).contains(&keypoints2d[k].x) || !(0.0..=h).contains(&keypoints2d[k].y))
    {
        log::warn!("dorsal keypoints extend past the image; crop is zero-filled there");
    }
    Ok(DorsalCrop {
        raster: warp_grid(&transform, grid, cfg.size, cfg.size),
        transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keypoints_with_box(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2<f64>> {
        let mut kp = vec![Point2::new((x0 + x1) / 2.0, (y0 + y1) / 2.0); 21];
        kp[0] = Point2::new(x0, y1);
        kp[2] = Point2::new(x0, y0);
        kp[9] = Point2::new((x0 + x1) / 2.0, y0);
        kp[17] = Point2::new(x1, y0 + 1.0);
        kp[13] = Point2::new(x1 - 1.0, y1);
        kp
    }

    #[test]
    fn output_is_384_square() {
        let grid = Raster::new(640, 480, 1);
        let crop = dorsal_crop(&keypoints_with_box(100.0, 80.0, 300.0, 260.0), &grid, &CropConfig::default()).unwrap();
        assert_eq!((crop.raster.width, crop.raster.height), (384, 384));
    }

    #[test]
    fn full_frame_with_no_margin_is_plain_resample() {
        let grid = Raster::from_fn(50, 40, 1, |x, y, _| ((x * 13 + y * 7) % 17) as f64);
        let cfg = CropConfig { margin: 0.0, ..CropConfig::default() };
        let crop = dorsal_crop(&keypoints_with_box(0.0, 0.0, 49.0, 39.0), &grid, &cfg).unwrap();
        let direct = warp_grid(&Homography::scale_translation(383.0 / 49.0, 383.0 / 39.0, 0.0, 0.0).unwrap(), &grid, 384, 384);
        assert_eq!(crop.raster, direct);
    }

    #[test]
    fn checkerboard_matches_analytic_resample() {
        // Cells are 8 px; sampling at cell centers avoids the bilinear blur at edges.
        let board = |x: f64, y: f64| ((x / 8.0).floor() as i64 + (y / 8.0).floor() as i64).rem_euclid(2) as f64;
        let grid = Raster::from_fn(200, 160, 1, |x, y, _| board(x as f64, y as f64));
        let (x0, y0, x1, y1) = (40.0, 24.0, 136.0, 120.0);
        let cfg = CropConfig { margin: 0.0, size: 97, ..CropConfig::default() };
        let crop = dorsal_crop(&keypoints_with_box(x0, y0, x1, y1), &grid, &cfg).unwrap();
        // Box width 96 over 96 output steps: one crop pixel per image pixel.
        for v in 0..97 {
            for u in 0..97 {
                let (x, y) = (x0 + u as f64 * (x1 - x0) / 96.0, y0 + v as f64 * (y1 - y0) / 96.0);
                assert!((crop.raster.get(u, v, 0) - board(x, y)).abs() < 1e-9, "({u}, {v})");
            }
        }
        let corner = crop.transform.apply(&Point2::new(x1, y1)).unwrap();
        assert!((corner - Point2::new(96.0, 96.0)).norm() < 1e-9);
    }

    #[test]
    fn margin_is_fraction_of_diagonal() {
        let kp = keypoints_with_box(100.0, 100.0, 130.0, 140.0);
        let t = crop_transform(&kp, &CropConfig::default()).unwrap();
        let pad = 0.15 * 50.0;
        let origin = t.apply(&Point2::new(100.0 - pad, 100.0 - pad)).unwrap();
        let far = t.apply(&Point2::new(130.0 + pad, 140.0 + pad)).unwrap();
        assert!(origin.coords.norm() < 1e-9);
        assert!((far - Point2::new(383.0, 383.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_extent_box_is_rejected() {
        let kp = vec![Point2::new(5.0, 5.0); 21];
        let grid = Raster::new(10, 10, 1);
        assert!(matches!(dorsal_crop(&kp, &grid, &CropConfig::default()), Err(AlignError::DegenerateBox(_))));
    }
}
