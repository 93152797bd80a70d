//! Inputs shared by the benchmarks.

use dorsalkit::alignment::Homography;
use dorsalkit::features::FeatureGrid;
use dorsalkit::hand_model::synthetic::{random_swing_pose, synthetic_hand};
use dorsalkit::pipeline::fixture::fixture_rig;
use dorsalkit::{CameraRig, HandState, RiggedHandTemplate};
use nalgebra::{Matrix3, Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct HandScene {
    pub template: RiggedHandTemplate,
    pub rig: CameraRig,
    pub state: HandState,
}

/// Synthetic hand in a random articulation under the dorsal fixture camera.
pub fn hand_scene(seed: u64) -> HandScene {
    let template = synthetic_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = HandState::neutral(template.shape_rank());
    state.pose = random_swing_pose(&template, &mut rng, 0.6);
    state.global_orient = Vector3::new(0.2, rng.random_range(-0.8..0.8), 0.0);
    HandScene {
        template,
        rig: fixture_rig(),
        state,
    }
}

/// `n` correspondences under a fixed projective map with `outliers` of them displaced.
pub fn correspondences(n: usize, outliers: usize, seed: u64) -> (Vec<Point2<f64>>, Vec<Point2<f64>>) {
    let h = Homography::new(Matrix3::new(1.05, 0.02, -7.0, -0.03, 0.97, 4.0, 5e-5, 1e-4, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src: Vec<Point2<f64>> = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)))
        .collect();
    let dst = src
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let q = h.apply(p).unwrap();
            if i < outliers {
                q + nalgebra::Vector2::new(rng.random_range(30.0..120.0), rng.random_range(-120.0..-30.0))
            } else {
                q
            }
        })
        .collect();
    (src, dst)
}

/// Random grid of `24 × 24` patches with `channels` features each.
pub fn feature_grid(channels: usize, seed: u64) -> FeatureGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..24 * 24 * channels).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureGrid::for_crop(384, channels, data).unwrap()
}
