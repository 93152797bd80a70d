//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use nalgebra::{Rotation3, Vector3};
use rand::Rng;

use dorsalkit::HandPart;

type V3 = Vector3<f64>;

/// Visible fraction of every face seen from a camera at the origin looking
/// down +z, by brute-force ray casting.
///
/// Each face is split into `k²` equal-area sub-triangles whose centroids are
/// the samples. A sample is hidden when the segment from the origin to it
/// crosses another front-facing triangle. Back-facing triangles (normal
/// pointing away from the viewer) are invisible and never occlude.
pub fn ray_cast_visibility(vertices_cam: &[V3], faces: &[[usize; 3]], k: usize) -> Vec<f64> {
    let tri = |f: &[usize; 3]| (vertices_cam[f[0]], vertices_cam[f[1]], vertices_cam[f[2]]);
    let front = front_facing(vertices_cam, faces);
    // Image-plane bounds and nearest depth for a cheap rejection test.
    let bounds: Vec<Option<[f64; 5]>> = faces
        .iter()
        .zip(&front)
        .map(|(f, &is_front)| {
            let (a, b, c) = tri(f);
            if !is_front || a.z <= 0.0 || b.z <= 0.0 || c.z <= 0.0 {
                return None;
            }
            let us = [a.x / a.z, b.x / b.z, c.x / c.z];
            let vs = [a.y / a.z, b.y / b.z, c.y / c.z];
            Some([
                us.iter().cloned().fold(f64::INFINITY, f64::min),
                us.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                vs.iter().cloned().fold(f64::INFINITY, f64::min),
                vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                a.z.min(b.z).min(c.z),
            ])
        })
        .collect();

    faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            if !front[fi] {
                return 0.0;
            }
            let samples = sub_triangle_centroids(tri(f), k);
            let visible = samples
                .iter()
                .filter(|p| {
                    let (u, v) = (p.x / p.z, p.y / p.z);
                    !faces.iter().enumerate().any(|(gi, g)| {
                        if gi == fi {
                            return false;
                        }
                        let Some([u0, u1, v0, v1, zmin]) = bounds[gi] else {
                            return false;
                        };
                        if u < u0 || u > u1 || v < v0 || v > v1 || zmin >= p.z {
                            return false;
                        }
                        segment_hits(p, tri(g))
                    })
                })
                .count();
            visible as f64 / samples.len() as f64
        })
        .collect()
}

/// Faces whose normal `(b − a) × (c − a)` points toward the origin camera.
pub fn front_facing(vertices_cam: &[V3], faces: &[[usize; 3]]) -> Vec<bool> {
    faces
        .iter()
        .map(|f| {
            let (a, b, c) = (vertices_cam[f[0]], vertices_cam[f[1]], vertices_cam[f[2]]);
            (b - a).cross(&(c - a)).dot(&a) < 0.0
        })
        .collect()
}

fn sub_triangle_centroids((a, b, c): (V3, V3, V3), k: usize) -> Vec<V3> {
    let kf = k as f64;
    let at = |i: f64, j: f64| a + (b - a) * (i / kf) + (c - a) * (j / kf);
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k - i {
            let (fi, fj) = (i as f64, j as f64);
            out.push((at(fi, fj) + at(fi + 1.0, fj) + at(fi, fj + 1.0)) / 3.0);
            if i + j + 1 < k {
                out.push((at(fi + 1.0, fj) + at(fi, fj + 1.0) + at(fi + 1.0, fj + 1.0)) / 3.0);
            }
        }
    }
    out
}

/// Whether the open segment from the origin to `p` crosses triangle `(a, b, c)`.
fn segment_hits(p: &V3, (a, b, c): (V3, V3, V3)) -> bool {
    // Möller–Trumbore with the ray origin at 0 and direction p (t = 1 at p).
    let (e1, e2) = (b - a, c - a);
    let h = p.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-18 {
        return false;
    }
    let s = -a;
    let u = s.dot(&h) / det;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = p.dot(&q) / det;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = e2.dot(&q) / det;
    t > 0.0 && t < 1.0 - 1e-9
}

/// Closed box with outward-facing triangles.
pub fn push_box(center: V3, rotation: &Rotation3<f64>, half: V3, verts: &mut Vec<V3>, faces: &mut Vec<[usize; 3]>) {
    let base = verts.len();
    for s in 0..8 {
        let sign = |bit: usize| if s >> bit & 1 == 1 { 1.0 } else { -1.0 };
        verts.push(center + rotation * V3::new(sign(0) * half.x, sign(1) * half.y, sign(2) * half.z));
    }
    // Quads as corner bit patterns, each split into two triangles.
    const QUADS: [[usize; 4]; 6] = [[0, 2, 6, 4], [1, 5, 7, 3], [0, 4, 5, 1], [2, 3, 7, 6], [0, 1, 3, 2], [4, 6, 7, 5]];
    for q in QUADS {
        for t in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
            let [a, b, c] = t.map(|i| base + i);
            let n = (verts[b] - verts[a]).cross(&(verts[c] - verts[a]));
            let outward = (verts[a] + verts[b] + verts[c]) / 3.0 - center;
            faces.push(if n.dot(&outward) >= 0.0 { [a, b, c] } else { [a, c, b] });
        }
    }
}

pub struct Scene {
    pub vertices: Vec<V3>,
    pub faces: Vec<[usize; 3]>,
    pub labels: Vec<HandPart>,
}

/// `boxes` randomly placed and oriented boxes in front of an origin camera,
/// each labeled with a random part.
pub fn random_box_scene<R: Rng>(rng: &mut R, boxes: usize) -> Scene {
    let mut s = Scene {
        vertices: Vec::new(),
        faces: Vec::new(),
        labels: Vec::new(),
    };
    for _ in 0..boxes {
        let z = rng.random_range(0.5..1.2);
        let center = V3::new(rng.random_range(-0.12..0.12) * z, rng.random_range(-0.1..0.1) * z, z);
        let axis = V3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rot = Rotation3::new(axis.normalize() * rng.random_range(0.0..std::f64::consts::PI));
        let half = V3::new(rng.random_range(0.01..0.06), rng.random_range(0.01..0.06), rng.random_range(0.01..0.06));
        push_box(center, &rot, half, &mut s.vertices, &mut s.faces);
        let part = HandPart::ALL[rng.random_range(0..HandPart::ALL.len())];
        s.labels.extend([part; 12]);
    }
    s
}

pub fn triangle_area(v: &[V3], f: &[usize; 3]) -> f64 {
    0.5 * (v[f[1]] - v[f[0]]).cross(&(v[f[2]] - v[f[0]])).norm()
}
