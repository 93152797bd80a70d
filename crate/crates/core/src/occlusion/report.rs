use nalgebra::Vector3;
use serde::Serialize;

use super::{
    backface_filter, rasterize_zbuffer, OcclusionError, RasterConfig, ThresholdMode, VisibilityThresholds,
};
use crate::camera::{world_to_camera, CameraRig};
use crate::hand_model::{face_areas, Finger, HandMesh, HandPart, PartMap, RiggedHandTemplate};
use crate::stats::{percentile_summary, PercentileSummary};

/// Visible surface of one posed hand seen from one camera.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisibilityReport {
    /// Face area (m²) times the `z³`-weighted fraction of its covered pixels it wins.
    pub per_face_visible_area: Vec<f64>,
    pub part_area: PartMap<f64>,
    pub visible_area: PartMap<f64>,
    /// `visible_area / part_area` without finger scaling.
    pub raw_visibility: PartMap<f64>,
    /// Raw fraction with fingers divided by the finger scale and clamped to 1.
    pub per_part_visibility: PartMap<f64>,
    pub mean_finger_visibility: f64,
    /// Indexed like [`Finger::ALL`].
    pub fully_occluded: [bool; 5],
    pub fully_visible: [bool; 5],
    pub thresholds: VisibilityThresholds,
}

impl VisibilityReport {
    pub fn finger_visibility(&self, finger: Finger) -> f64 {
        self.per_part_visibility[finger.part()]
    }

    pub fn dorsal_visibility(&self) -> f64 {
        self.per_part_visibility[HandPart::Dorsum]
    }

    pub fn occluded_finger_count(&self) -> usize {
        self.fully_occluded.iter().filter(|&&f| f).count()
    }

    pub fn visible_finger_count(&self) -> usize {
        self.fully_visible.iter().filter(|&&f| f).count()
    }
}

pub fn visibility_report(
    mesh: &HandMesh,
    template: &RiggedHandTemplate,
    rig: &CameraRig,
    cfg: &RasterConfig,
    thresholds: &VisibilityThresholds,
) -> Result<VisibilityReport, OcclusionError> {
    scene_visibility(&mesh.vertices, &mesh.faces, template.part_labels(), rig, cfg, thresholds)
}

/// Visibility of an arbitrary labeled triangle soup given in world coordinates.
pub fn scene_visibility(
    vertices_world: &[Vector3<f64>],
    faces: &[[usize; 3]],
    labels: &[HandPart],
    rig: &CameraRig,
    cfg: &RasterConfig,
    thresholds: &VisibilityThresholds,
) -> Result<VisibilityReport, OcclusionError> {
    thresholds.validate()?;
    if labels.len() != faces.len() {
        return Err(OcclusionError::LabelCount {
            labels: labels.len(),
            faces: faces.len(),
        });
    }
    let cam = world_to_camera(rig, vertices_world);
    let front = backface_filter(&cam, faces);
    let raster = rasterize_zbuffer(&cam, faces, &front, rig, cfg)?;

    let areas = face_areas(vertices_world, faces);
    let per_face_visible_area: Vec<f64> = areas
        .iter()
        .enumerate()
        .map(|(f, a)| a * raster.won_fraction(f))
        .collect();

    let mut part_area = PartMap::<f64>::default();
    let mut visible_area = PartMap::<f64>::default();
    for (f, &part) in labels.iter().enumerate() {
        part_area[part] += areas[f];
        visible_area[part] += per_face_visible_area[f];
    }
    let raw_visibility = PartMap::from_fn(|p| {
        if part_area[p] > 0.0 {
            (visible_area[p] / part_area[p]).clamp(0.0, 1.0)
        } else {
            log::warn!("part {} has zero surface area; visibility set to 0", p.as_str());
            0.0
        }
    });
    let per_part_visibility = PartMap::from_fn(|p| match p.finger() {
        Some(_) => (raw_visibility[p] / thresholds.finger_scale).min(1.0),
        None => raw_visibility[p],
    });

    let thresholded = Finger::ALL.map(|f| match thresholds.mode {
        ThresholdMode::Scaled => per_part_visibility[f.part()],
        ThresholdMode::Raw => raw_visibility[f.part()],
    });
    let fully_occluded = thresholded.map(|v| v <= thresholds.occluded);
    let fully_visible = thresholded.map(|v| v > thresholds.visible);
    let mean_finger_visibility = Finger::ALL.iter().map(|f| per_part_visibility[f.part()]).sum::<f64>() / 5.0;

    Ok(VisibilityReport {
        per_face_visible_area,
        part_area,
        visible_area,
        raw_visibility,
        per_part_visibility,
        mean_finger_visibility,
        fully_occluded,
        fully_visible,
        thresholds: *thresholds,
    })
}

/// Occlusion statistics over many frames.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetOcclusionStats {
    pub frames: usize,
    /// Frames by number of fully visible fingers (0 to 5).
    pub visible_finger_histogram: [usize; 6],
    pub visible_finger_distribution: [f64; 6],
    /// Frames by number of fully occluded fingers (0 to 5).
    pub occluded_finger_histogram: [usize; 6],
    pub occluded_frames: usize,
    pub occluded_frame_fraction: f64,
    /// Dorsum visibility over frames with at least one fully occluded finger.
    pub dorsal_when_occluded: Option<PercentileSummary>,
}

pub fn dataset_occlusion_stats(reports: &[VisibilityReport]) -> Result<DatasetOcclusionStats, OcclusionError> {
    if reports.is_empty() {
        return Err(OcclusionError::Empty);
    }
    let mut visible_finger_histogram = [0usize; 6];
    let mut occluded_finger_histogram = [0usize; 6];
    let mut dorsal = Vec::new();
    for r in reports {
        visible_finger_histogram[r.visible_finger_count()] += 1;
        let occluded = r.occluded_finger_count();
        occluded_finger_histogram[occluded] += 1;
        if occluded > 0 {
            dorsal.push(r.dorsal_visibility());
        }
    }
    let frames = reports.len();
    let occluded_frames = dorsal.len();
    Ok(DatasetOcclusionStats {
        frames,
        visible_finger_histogram,
        visible_finger_distribution: visible_finger_histogram.map(|c| c as f64 / frames as f64),
        occluded_finger_histogram,
        occluded_frames,
        occluded_frame_fraction: occluded_frames as f64 / frames as f64,
        dorsal_when_occluded: if dorsal.is_empty() {
            None
        } else {
            Some(percentile_summary(&dorsal)?)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::hand_model::{pose_mesh, synthetic::synthetic_hand, HandState};
    use nalgebra::Matrix3;

    fn intrinsics() -> Intrinsics {
        Intrinsics {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
        }
    }

    /// Camera 0.4 m above the back of the hand, looking down −Z.
    fn dorsal_rig() -> CameraRig {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        CameraRig::new(intrinsics(), r, Vector3::new(0.0, 0.06, 0.4), 640, 480).unwrap()
    }

    fn quad(z: f64, x0: f64, x1: f64, y0: f64, y1: f64, verts: &mut Vec<Vector3<f64>>) -> [[usize; 3]; 2] {
        let b = verts.len();
        verts.extend([
            Vector3::new(x0, y0, z),
            Vector3::new(x0, y1, z),
            Vector3::new(x1, y0, z),
            Vector3::new(x1, y1, z),
        ]);
        // Both triangles wound with normals toward −Z (toward the origin camera).
        [[b, b + 1, b + 2], [b + 3, b + 2, b + 1]]
    }

    #[test]
    fn flat_hand_facing_camera() {
        let t = synthetic_hand();
        let mesh = pose_mesh(&t, &HandState::neutral(0)).unwrap();
        let r = visibility_report(&mesh, &t, &dorsal_rig(), &RasterConfig::square(512), &Default::default()).unwrap();
        assert!(r.per_part_visibility[HandPart::Dorsum] > 0.98, "{:?}", r.per_part_visibility);
        assert_eq!(r.per_part_visibility[HandPart::Palm], 0.0);
        for f in Finger::ALL {
            assert!(!r.fully_occluded[f as usize], "{f:?}");
        }
        for (f, v) in r.per_face_visible_area.iter().enumerate() {
            assert!(*v <= face_areas(&mesh.vertices, &mesh.faces)[f] + 1e-15);
        }
    }

    #[test]
    fn half_covered_plane() {
        let rig = CameraRig::identity(intrinsics(), 640, 480).unwrap();
        let mut v = Vec::new();
        let mut faces = Vec::new();
        faces.extend(quad(2.0, -0.2, 0.2, -0.2, 0.2, &mut v));
        // Projects onto [-0.15, 0] x [-0.15, 0.15] normalized: the left half of the far quad.
        faces.extend(quad(1.0, -0.15, 0.0, -0.15, 0.15, &mut v));
        let labels = [HandPart::Dorsum, HandPart::Dorsum, HandPart::Palm, HandPart::Palm];
        let r = scene_visibility(&v, &faces, &labels, &rig, &RasterConfig::default(), &Default::default()).unwrap();
        assert!((r.raw_visibility[HandPart::Dorsum] - 0.5).abs() < 0.01, "{}", r.raw_visibility[HandPart::Dorsum]);
        assert!((r.raw_visibility[HandPart::Palm] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn occluder_never_increases_visibility() {
        let rig = CameraRig::identity(intrinsics(), 640, 480).unwrap();
        let mut v = Vec::new();
        let mut faces = quad(2.0, -0.2, 0.2, -0.2, 0.2, &mut v).to_vec();
        let mut labels = vec![HandPart::Dorsum; 2];
        let cfg = RasterConfig::square(256);
        let mut last = 1.0 + 1e-12;
        for k in 0..4 {
            let r = scene_visibility(&v, &faces, &labels, &rig, &cfg, &Default::default()).unwrap();
            assert!(r.raw_visibility[HandPart::Dorsum] <= last);
            last = r.raw_visibility[HandPart::Dorsum];
            let x = -0.1 + 0.05 * k as f64;
            faces.extend(quad(1.0, x, x + 0.04, -0.05, 0.05, &mut v));
            labels.extend([HandPart::Palm; 2]);
        }
        assert!(last < 0.9);
    }

    fn report_with(raw: f64, thresholds: VisibilityThresholds) -> VisibilityReport {
        // A finger-labeled quad whose visible fraction is `raw`, built by hiding
        // the rest of it behind a nearer quad.
        let rig = CameraRig::identity(intrinsics(), 640, 480).unwrap();
        let mut v = Vec::new();
        let mut faces = quad(2.0, -0.2, 0.2, -0.2, 0.2, &mut v).to_vec();
        let edge = -0.1 + 0.2 * raw;
        faces.extend(quad(1.0, edge, 0.2, -0.2, 0.2, &mut v));
        let labels = [HandPart::Index, HandPart::Index, HandPart::Dorsum, HandPart::Dorsum];
        scene_visibility(&v, &faces, &labels, &rig, &RasterConfig::default(), &thresholds).unwrap()
    }

    #[test]
    fn finger_scaling_and_threshold_order() {
        let scaled = report_with(0.08, VisibilityThresholds::default());
        let raw = scaled.raw_visibility[HandPart::Index];
        assert!((raw - 0.08).abs() < 0.005, "{raw}");
        assert!((scaled.per_part_visibility[HandPart::Index] - raw / 0.5).abs() < 1e-12);
        // Scaled 0.16 is above the 0.10 cutoff.
        assert!(!scaled.fully_occluded[Finger::Index as usize]);
        let raw_mode = VisibilityThresholds {
            mode: ThresholdMode::Raw,
            ..VisibilityThresholds::default()
        };
        assert!(report_with(0.08, raw_mode).fully_occluded[Finger::Index as usize]);
        assert!(report_with(0.04, VisibilityThresholds::default()).fully_occluded[Finger::Index as usize]);
        // Zero-area fingers report 0 and are flagged occluded.
        assert!(scaled.fully_occluded[Finger::Thumb as usize]);
        assert_eq!(scaled.per_part_visibility[HandPart::Thumb], 0.0);
    }

    fn flagged(occluded: [bool; 5], visible: [bool; 5], dorsal: f64) -> VisibilityReport {
        let mut per_part_visibility = PartMap::<f64>::default();
        per_part_visibility[HandPart::Dorsum] = dorsal;
        VisibilityReport {
            per_face_visible_area: vec![],
            part_area: PartMap::default(),
            visible_area: PartMap::default(),
            raw_visibility: PartMap::default(),
            per_part_visibility,
            mean_finger_visibility: 0.0,
            fully_occluded: occluded,
            fully_visible: visible,
            thresholds: VisibilityThresholds::default(),
        }
    }

    #[test]
    fn dataset_stats_all_visible() {
        let reports = vec![flagged([false; 5], [true; 5], 1.0); 4];
        let s = dataset_occlusion_stats(&reports).unwrap();
        assert_eq!(s.visible_finger_histogram, [0, 0, 0, 0, 0, 4]);
        assert_eq!(s.visible_finger_distribution[5], 1.0);
        assert_eq!(s.occluded_frame_fraction, 0.0);
        assert!(s.dorsal_when_occluded.is_none());
        assert!(dataset_occlusion_stats(&[]).is_err());
    }

    #[test]
    fn dataset_stats_manual_tally() {
        let f = false;
        let t = true;
        let reports = vec![
            flagged([t, f, f, f, f], [f, t, t, t, t], 0.9),
            flagged([f; 5], [t; 5], 0.8),
            flagged([t, t, f, f, f], [f, f, t, t, t], 0.7),
            flagged([f; 5], [f; 5], 0.6),
            flagged([f; 5], [t, t, f, f, f], 0.5),
            flagged([t; 5], [f; 5], 0.4),
            flagged([f; 5], [t, f, f, f, f], 0.3),
            flagged([f, f, f, f, t], [t, t, t, t, f], 0.2),
            flagged([f; 5], [t; 5], 0.1),
            flagged([f; 5], [t, t, t, f, f], 0.0),
        ];
        let s = dataset_occlusion_stats(&reports).unwrap();
        // Visible counts per frame: 4,5,3,0,2,0,1,4,5,3.
        assert_eq!(s.visible_finger_histogram, [2, 1, 1, 2, 2, 2]);
        // Occluded counts: 1,0,2,0,0,5,0,1,0,0.
        assert_eq!(s.occluded_finger_histogram, [6, 2, 1, 0, 0, 1]);
        assert_eq!(s.occluded_frames, 4);
        assert_eq!(s.occluded_frame_fraction, 0.4);
        // Dorsal values of occluded frames: 0.9, 0.7, 0.4, 0.2.
        let d = s.dorsal_when_occluded.unwrap();
        assert_eq!((d.min, d.max), (0.2, 0.9));
        assert!((d.median - 0.55).abs() < 1e-12);
    }
}
