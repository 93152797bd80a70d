//! Synthetic dataset generator for smoke tests and demos.
//!
//! Predictions carry a known per-frame angular error
//! `e = intercept + slope · v + noise` (degrees), where `v` is the ground-truth
//! mesh's mean finger visibility, applied as the same-angle rotation on every
//! joint. The MPJAE of each frame is therefore `e` exactly and a regression of
//! MPJAE on visibility should recover `slope`.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

use super::io::{file_stem, ReportDir};
use super::{
    to_jsonl, FrameAnnotation, Manifest, MarkerObservation, PipelineError, Prediction, RunConfig, ANNOTATIONS_SCHEMA,
    MANIFEST_SCHEMA, PREDICTIONS_SCHEMA,
};
use crate::alignment::Raster;
use crate::camera::{CameraRig, Intrinsics};
use crate::geometry::{axis_angle_to_matrix, matrix_to_axis_angle};
use crate::hand_model::synthetic::{random_swing_pose, synthetic_hand};
use crate::hand_model::{keypoints, pose_mesh, HandState, RiggedHandTemplate};
use crate::occlusion::visibility_report;

pub const GESTURES: [&str; 4] = ["tap", "pinch", "swipe", "grasp"];

#[derive(Clone, Debug)]
pub struct FixtureConfig {
    pub frames: usize,
    pub subjects: usize,
    pub seed: u64,
    /// Frames (from the start) that also get a rendered PGM.
    pub images: usize,
    pub slope_deg: f64,
    pub intercept_deg: f64,
    /// Half-width of the uniform noise added to each frame's error.
    pub noise_deg: f64,
    pub config: RunConfig,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            frames: 20,
            subjects: 4,
            seed: 0,
            images: 2,
            slope_deg: -20.0,
            intercept_deg: 25.0,
            noise_deg: 0.2,
            config: RunConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureTruth {
    pub seed: u64,
    pub frames: usize,
    pub ground_truth_frames: usize,
    pub keypoint_only_frames: usize,
    pub marker_only_frames: usize,
    pub slope_deg: f64,
    pub intercept_deg: f64,
    pub noise_deg: f64,
    /// Injected MPJAE per ground-truth frame, in frame order.
    pub injected_error_deg: Vec<(String, f64)>,
    pub mean_finger_visibility: Vec<(String, f64)>,
}

/// The dorsal camera used by the fixture: 0.4 m above the back of the hand.
pub fn fixture_rig() -> CameraRig {
    let k = Intrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: 320.0,
        cy: 240.0,
    };
    let r = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    CameraRig::new(k, r, Vector3::new(0.0, 0.06, 0.4), 640, 480).expect("valid fixture rig")
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_state<R: Rng>(template: &RiggedHandTemplate, rng: &mut R) -> HandState {
    let mut s = HandState::neutral(template.shape_rank());
    let curl = rng.random_range(0.05..1.2);
    s.pose = random_swing_pose(template, rng, curl);
    s.global_orient = Vector3::new(
        rng.random_range(-0.9..0.9),
        rng.random_range(-1.8..1.8),
        rng.random_range(-0.4..0.4),
    );
    for b in s.shape.iter_mut() {
        *b = rng.random_range(-1.0..1.0);
    }
    s
}

/// Every joint rotated by `angle` radians about its own random axis.
fn perturbed<R: Rng>(state: &HandState, angle: f64, rng: &mut R) -> HandState {
    let mut p = state.clone();
    for j in p.pose.iter_mut() {
        let err = axis_angle_to_matrix(&(random_unit(rng) * angle));
        *j = matrix_to_axis_angle(&(axis_angle_to_matrix(j) * err));
    }
    p
}

fn render(rig: &CameraRig, kp: &[Vector3<f64>], seed: u64) -> Raster {
    let (w, h) = rig.image_size();
    let dots: Vec<(f64, f64)> = kp
        .iter()
        .map(|p| rig.project_point(&rig.to_camera(p)))
        .filter(|p| p.valid)
        .map(|p| (p.pixel.x, p.pixel.y))
        .collect();
    Raster::from_fn(w as usize, h as usize, 1, |x, y, _| {
        let (xf, yf) = (x as f64, y as f64);
        if dots.iter().any(|&(u, v)| (u - xf).powi(2) + (v - yf).powi(2) <= 36.0) {
            220.0
        } else {
            (40 + ((x as u64 * 7 + y as u64 * 13 + seed) % 23)) as f64
        }
    })
}

/// Writes `calibration.json`, `annotations.jsonl`, `predictions.jsonl`,
/// `manifest.json`, `fixture_truth.json` and a few images into `out`.
pub fn write_fixture(out: &Path, cfg: &FixtureConfig) -> Result<FixtureTruth, PipelineError> {
    if cfg.frames == 0 || cfg.subjects == 0 {
        return Err(PipelineError::Config("fixture needs at least one frame and one subject".into()));
    }
    cfg.config.validate()?;
    let template = synthetic_hand();
    let rig = fixture_rig();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dir = ReportDir::create(out)?;
    let tones: Vec<u8> = (0..cfg.subjects).map(|s| (2 + 2 * s % 9) as u8).collect();

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut preds = Vec::new();
    let mut truth = FixtureTruth {
        seed: cfg.seed,
        frames: cfg.frames,
        ground_truth_frames: 0,
        keypoint_only_frames: 0,
        marker_only_frames: 0,
        slope_deg: cfg.slope_deg,
        intercept_deg: cfg.intercept_deg,
        noise_deg: cfg.noise_deg,
        injected_error_deg: Vec::new(),
        mean_finger_visibility: Vec::new(),
    };
    for i in 0..cfg.frames {
        let subject = i % cfg.subjects;
        let state = random_state(&template, &mut rng);
        let mesh = pose_mesh(&template, &state)?;
        let kp = keypoints(&mesh);
        let id = format!("s{:02}_f{:04}", subject + 1, i);
        let mut frame = FrameAnnotation {
            frame_id: id.clone(),
            subject_id: format!("s{:02}", subject + 1),
            gesture: GESTURES[(i / cfg.subjects) % GESTURES.len()].to_string(),
            keypoints3d: Some(kp.iter().map(|p| [p.x, p.y, p.z]).collect()),
            markers3d: None,
            gt_state: None,
            skin_tone_level: Some(tones[subject]),
            image: None,
        };
        if i % 5 == 4 {
            truth.keypoint_only_frames += 1;
        } else if i % 7 == 6 {
            let ids: Vec<usize> = (0..template.vertex_count()).step_by(7).collect();
            frame.keypoints3d = None;
            frame.markers3d = Some(MarkerObservation {
                points: ids.iter().map(|&v| mesh.vertices[v].into()).collect(),
                vertex_ids: ids,
            });
            truth.marker_only_frames += 1;
        } else {
            let vis = visibility_report(&mesh, &template, &rig, &cfg.config.raster, &cfg.config.thresholds())?;
            let v = vis.mean_finger_visibility;
            let e = cfg.intercept_deg + cfg.slope_deg * v + rng.random_range(-cfg.noise_deg..=cfg.noise_deg);
            preds.push(Prediction {
                frame_id: id.clone(),
                state: perturbed(&state, e.to_radians(), &mut rng),
            });
            truth.injected_error_deg.push((id.clone(), e));
            truth.mean_finger_visibility.push((id.clone(), v));
            truth.ground_truth_frames += 1;
            frame.gt_state = Some(state);
        }
        if i < cfg.images {
            let name = format!("images/{}.pgm", file_stem(&id));
            dir.write_bytes(&name, &render(&rig, &kp, cfg.seed.wrapping_add(i as u64)).to_pnm_bytes(255)?)?;
            frame.image = Some(name.into());
        }
        frames.push(frame);
    }

    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        calibration: "calibration.json".into(),
        annotations: vec!["annotations.jsonl".into()],
        template: None,
        predictions: Some("predictions.jsonl".into()),
        output: Some("report".into()),
        seed: cfg.seed,
        config: cfg.config.clone(),
        base_dir: Default::default(),
    };
    dir.write_json("calibration.json", &rig.to_data())?;
    dir.write_bytes("annotations.jsonl", to_jsonl(ANNOTATIONS_SCHEMA, &frames)?.as_bytes())?;
    dir.write_bytes("predictions.jsonl", to_jsonl(PREDICTIONS_SCHEMA, &preds)?.as_bytes())?;
    dir.write_json("manifest.json", &manifest)?;
    dir.write_json("fixture_truth.json", &truth)?;
    Ok(truth)
}
