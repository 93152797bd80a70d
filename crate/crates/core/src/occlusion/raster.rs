use nalgebra::{Vector2, Vector3};

use super::{OcclusionError, RasterConfig};
use crate::camera::CameraRig;

/// Faces whose outward normal points toward the camera (`normal · view < 0`,
/// with `view` running from the camera center to the face).
pub fn backface_filter(vertices_cam: &[Vector3<f64>], faces: &[[usize; 3]]) -> Vec<usize> {
    faces
        .iter()
        .enumerate()
        .filter(|(_, &[a, b, c])| {
            let (a, b, c) = (vertices_cam[a], vertices_cam[b], vertices_cam[c]);
            let normal = (b - a).cross(&(c - a));
            normal.dot(&a) < 0.0
        })
        .map(|(f, _)| f)
        .collect()
}

/// Per-face Z-buffer outcome. Vectors are indexed by face and cover every
/// face of the mesh; faces outside the candidate list stay at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterResult {
    /// Pixel centers inside the projected triangle.
    pub covered_pixels: Vec<u32>,
    /// Covered pixels where the face is the nearest surface (within epsilon).
    pub won_pixels: Vec<u32>,
    /// Covered pixels weighted by `z³`, proportional to the surface area each
    /// pixel spans on the face's plane.
    pub covered_weight: Vec<f64>,
    pub won_weight: Vec<f64>,
    /// Image-plane window `[x0, y0, x1, y1]` that was rasterized, if any.
    pub window: Option<[f64; 4]>,
}

impl RasterResult {
    pub fn is_visible(&self, face: usize) -> bool {
        self.won_pixels[face] > 0
    }

    /// Fraction of a face's surface area it wins, from the `z³`-weighted
    /// pixel counts; 0 when it covers no pixel.
    pub fn won_fraction(&self, face: usize) -> f64 {
        match self.covered_pixels[face] {
            0 => 0.0,
            _ => self.won_weight[face] / self.covered_weight[face],
        }
    }
}

/// A candidate triangle in raster coordinates with inverse depths.
struct ScreenTriangle {
    face: usize,
    p: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    inv_area: f64,
    x_range: (usize, usize),
    y_range: (usize, usize),
}

impl ScreenTriangle {
    /// Barycentric-interpolated depth at a point, or `None` when outside.
    #[inline]
    fn depth_at(&self, q: Vector2<f64>) -> Option<f64> {
        let edge = |a: Vector2<f64>, b: Vector2<f64>| (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        let w0 = edge(self.p[1], self.p[2]) * self.inv_area;
        let w1 = edge(self.p[2], self.p[0]) * self.inv_area;
        let w2 = edge(self.p[0], self.p[1]) * self.inv_area;
        if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
            return None;
        }
        // 1/z is affine in screen space.
        let inv = w0 * self.inv_z[0] + w1 * self.inv_z[1] + w2 * self.inv_z[2];
        Some(1.0 / inv)
    }
}

/// Z-buffers the candidate faces over the projected bounding box of their
/// vertices (clipped to the image), sampling at raster pixel centers.
///
/// A pixel's nearest depth is found first; a face then wins every covered
/// pixel where its depth is within `depth_epsilon` of that minimum, so faces
/// sharing an edge or lying coplanar both count.
pub fn rasterize_zbuffer(
    vertices_cam: &[Vector3<f64>],
    faces: &[[usize; 3]],
    candidates: &[usize],
    rig: &CameraRig,
    cfg: &RasterConfig,
) -> Result<RasterResult, OcclusionError> {
    cfg.validate()?;
    let mut result = RasterResult {
        covered_pixels: vec![0; faces.len()],
        won_pixels: vec![0; faces.len()],
        covered_weight: vec![0.0; faces.len()],
        won_weight: vec![0.0; faces.len()],
        window: None,
    };

    let projected: Vec<_> = vertices_cam.iter().map(|v| rig.project_point(v)).collect();
    let usable: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&f| faces[f].iter().all(|&v| projected[v].valid))
        .collect();

    let (img_w, img_h) = rig.image_size();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &f in &usable {
        for &v in &faces[f] {
            let p = projected[v].pixel;
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
    }
    x0 = x0.max(0.0);
    y0 = y0.max(0.0);
    x1 = x1.min(img_w as f64);
    y1 = y1.min(img_h as f64);
    if !(x1 > x0 && y1 > y0) {
        return Ok(result);
    }
    result.window = Some([x0, y0, x1, y1]);

    let (rw, rh) = (cfg.width, cfg.height);
    let sx = (x1 - x0) / rw as f64;
    let sy = (y1 - y0) / rh as f64;
    let to_raster = |p: Vector2<f64>| Vector2::new((p.x - x0) / sx, (p.y - y0) / sy);

    let triangles: Vec<ScreenTriangle> = usable
        .iter()
        .filter_map(|&f| {
            let [a, b, c] = faces[f];
            let p = [to_raster(projected[a].pixel), to_raster(projected[b].pixel), to_raster(projected[c].pixel)];
            let area = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
            if area == 0.0 || !area.is_finite() {
                return None;
            }
            let min_x = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
            let max_x = p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
            let min_y = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
            let max_y = p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);
            // Pixel i has its center at i + 0.5.
            let lo = |m: f64| (m - 0.5).ceil().max(0.0) as usize;
            let hi = |m: f64, n: usize| ((m - 0.5).floor().min(n as f64 - 1.0)).max(-1.0) as i64;
            let (xi1, yi1) = (hi(max_x, rw), hi(max_y, rh));
            let (xi0, yi0) = (lo(min_x), lo(min_y));
            if xi1 < xi0 as i64 || yi1 < yi0 as i64 {
                return None;
            }
            Some(ScreenTriangle {
                face: f,
                p,
                inv_z: [1.0 / vertices_cam[a].z, 1.0 / vertices_cam[b].z, 1.0 / vertices_cam[c].z],
                inv_area: 1.0 / area,
                x_range: (xi0, xi1 as usize),
                y_range: (yi0, yi1 as usize),
            })
        })
        .collect();

    let mut zbuf = vec![f64::INFINITY; rw * rh];
    let scan = |t: &ScreenTriangle, visit: &mut dyn FnMut(usize, f64)| {
        for y in t.y_range.0..=t.y_range.1 {
            let row = y * rw;
            for x in t.x_range.0..=t.x_range.1 {
                if let Some(d) = t.depth_at(Vector2::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    visit(row + x, d);
                }
            }
        }
    };
    for t in &triangles {
        scan(t, &mut |i, d| {
            if d < zbuf[i] {
                zbuf[i] = d;
            }
        });
    }
    let eps = cfg.depth_epsilon;
    for t in &triangles {
        let (mut covered, mut won) = (0u32, 0u32);
        let (mut covered_w, mut won_w) = (0.0, 0.0);
        scan(t, &mut |i, d| {
            let w = d * d * d;
            covered += 1;
            covered_w += w;
            if d <= zbuf[i] + eps {
                won += 1;
                won_w += w;
            }
        });
        result.covered_pixels[t.face] = covered;
        result.won_pixels[t.face] = won;
        result.covered_weight[t.face] = covered_w;
        result.won_weight[t.face] = won_w;
    }
    Ok(result)
}
