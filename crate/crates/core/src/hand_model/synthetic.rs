//! Built-in rigged hand made of one 8-vertex box per bone.
//!
//! It has the same roles as a full parametric hand (16 joints, the 21-point
//! keypoint layout, seven face categories and a shape basis) so every
//! algorithm in the crate can run without a licensed asset. Coordinates are
//! meters in a right-hand frame: wrist at the origin, fingers along +Y, back
//! of the hand facing +Z, thumb on the −X side.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use super::{
    HandPart, KeypointSource, RiggedHandTemplate, TemplateData, NUM_JOINTS, NUM_POSE_JOINTS, TEMPLATE_FORMAT,
};

const PALM_LENGTH: f64 = 0.090;
const PALM_WIDTH: f64 = 0.072;
const PALM_THICKNESS: f64 = 0.024;
const FINGER_THICKNESS: f64 = 0.016;

struct Bone {
    joint: usize,
    parent: Option<usize>,
    start: Vector3<f64>,
    axis: Vector3<f64>,
    length: f64,
    width: f64,
    thickness: f64,
    part: HandPart,
}

struct FingerSpec {
    part: HandPart,
    first_joint: usize,
    x: f64,
    lengths: [f64; 3],
    width: f64,
}

// Joint numbering: index 1-3, middle 4-6, pinky 7-9, ring 10-12, thumb 13-15.
const FINGERS: [FingerSpec; 4] = [
    FingerSpec { part: HandPart::Index, first_joint: 1, x: -0.027, lengths: [0.040, 0.025, 0.020], width: 0.016 },
    FingerSpec { part: HandPart::Middle, first_joint: 4, x: -0.009, lengths: [0.045, 0.028, 0.022], width: 0.017 },
    FingerSpec { part: HandPart::Pinky, first_joint: 7, x: 0.027, lengths: [0.032, 0.020, 0.018], width: 0.014 },
    FingerSpec { part: HandPart::Ring, first_joint: 10, x: 0.009, lengths: [0.042, 0.026, 0.021], width: 0.016 },
];

const THUMB_FIRST_JOINT: usize = 13;
const THUMB_BASE: [f64; 3] = [-0.028, 0.022, 0.0];
const THUMB_LENGTHS: [f64; 3] = [0.035, 0.030, 0.025];
const THUMB_WIDTH: f64 = 0.018;

fn thumb_axis() -> Vector3<f64> {
    Vector3::new(-0.6, 0.8, 0.0)
}

fn bones() -> Vec<Bone> {
    let mut bones = vec![Bone {
        joint: 0,
        parent: None,
        start: Vector3::zeros(),
        axis: Vector3::y(),
        length: PALM_LENGTH,
        width: PALM_WIDTH,
        thickness: PALM_THICKNESS,
        part: HandPart::Palm,
    }];
    let mut chain = |first: usize, base: Vector3<f64>, axis: Vector3<f64>, lengths: [f64; 3], width: f64, thickness: f64, part| {
        let mut start = base;
        for (k, &length) in lengths.iter().enumerate() {
            bones.push(Bone {
                joint: first + k,
                parent: Some(if k == 0 { 0 } else { first + k - 1 }),
                start,
                axis,
                length,
                width,
                thickness,
                part,
            });
            start += axis * length;
        }
    };
    for f in &FINGERS {
        chain(f.first_joint, Vector3::new(f.x, PALM_LENGTH, 0.0), Vector3::y(), f.lengths, f.width, FINGER_THICKNESS, f.part);
    }
    chain(
        THUMB_FIRST_JOINT,
        Vector3::from(THUMB_BASE),
        thumb_axis(),
        THUMB_LENGTHS,
        THUMB_WIDTH,
        0.018,
        HandPart::Thumb,
    );
    bones.sort_by_key(|b| b.joint);
    bones
}

fn lateral(axis: &Vector3<f64>) -> Vector3<f64> {
    axis.cross(&Vector3::z()).normalize()
}

/// The built-in test hand.
pub fn synthetic_hand() -> RiggedHandTemplate {
    RiggedHandTemplate::from_data(synthetic_hand_data()).expect("synthetic hand is valid")
}

/// Random articulation: each joint bends about its frame's lateral (X) and
/// normal (Z) axes by angles drawn uniformly from `±max_angle` radians, with
/// no rotation about the bone axis.
pub fn random_swing_pose<R: Rng + ?Sized>(
    template: &RiggedHandTemplate,
    rng: &mut R,
    max_angle: f64,
) -> [Vector3<f64>; NUM_POSE_JOINTS] {
    std::array::from_fn(|i| {
        let flex = rng.random_range(-max_angle..=max_angle);
        let spread = rng.random_range(-max_angle..=max_angle);
        template.joint_frame(i + 1) * Vector3::new(flex, 0.0, spread)
    })
}

pub fn synthetic_hand_data() -> TemplateData {
    let bones = bones();
    assert_eq!(bones.len(), NUM_JOINTS);

    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    let mut regressor = vec![Vec::new(); NUM_JOINTS];
    let mut distal_faces = vec![Vec::new(); NUM_JOINTS];
    // Per-vertex owning bone, used by the shape basis.
    let mut owner = Vec::new();

    for bone in &bones {
        let l = lateral(&bone.axis);
        let n = Vector3::z();
        let base = vertices.len();
        for end in 0..2 {
            let c = bone.start + bone.axis * (end as f64 * bone.length);
            for (a, b) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                vertices.push(c + l * (a * bone.width / 2.0) + n * (b * bone.thickness / 2.0));
                owner.push(bone.joint);
                let mut w = vec![0.0; NUM_JOINTS];
                w[bone.joint] = 1.0;
                weights.push(w);
            }
        }
        regressor[bone.joint] = (0..4).map(|i| (base + i, 0.25)).collect();
        distal_faces[bone.joint] = (4..8).map(|i| (base + i, 0.25)).collect();

        let center = bone.start + bone.axis * (bone.length / 2.0);
        let quads = [[0, 1, 2, 3], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
        for q in quads {
            let idx = q.map(|i| base + i);
            let quad_center = idx.iter().map(|&i| vertices[i]).sum::<Vector3<f64>>() / 4.0;
            let outward = quad_center - center;
            for tri in [[idx[0], idx[1], idx[2]], [idx[0], idx[2], idx[3]]] {
                let normal = (vertices[tri[1]] - vertices[tri[0]]).cross(&(vertices[tri[2]] - vertices[tri[0]]));
                let tri = if normal.dot(&outward) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
                faces.push(tri);
                let part = if bone.part == HandPart::Palm && outward.normalize().dot(&n) > 0.99 {
                    HandPart::Dorsum
                } else {
                    bone.part
                };
                labels.push(part);
            }
        }
    }

    let rest_joints: Vec<[f64; 3]> = bones.iter().map(|b| [b.start.x, b.start.y, b.start.z]).collect();

    let tip = |joint: usize| KeypointSource::Vertices(distal_faces[joint].clone());
    let mut keypoint_map = vec![KeypointSource::Joint(0)];
    keypoint_map.extend([
        KeypointSource::Joint(THUMB_FIRST_JOINT),
        KeypointSource::Joint(THUMB_FIRST_JOINT + 1),
        KeypointSource::Joint(THUMB_FIRST_JOINT + 2),
        tip(THUMB_FIRST_JOINT + 2),
    ]);
    for part in [HandPart::Index, HandPart::Middle, HandPart::Ring, HandPart::Pinky] {
        let f = FINGERS.iter().find(|f| f.part == part).unwrap();
        keypoint_map.extend([
            KeypointSource::Joint(f.first_joint),
            KeypointSource::Joint(f.first_joint + 1),
            KeypointSource::Joint(f.first_joint + 2),
            tip(f.first_joint + 2),
        ]);
    }

    let shape_basis = shape_basis(&vertices, &owner, &bones);

    let frames = bones
        .iter()
        .map(|b| {
            let m = Matrix3::from_columns(&[lateral(&b.axis), b.axis, Vector3::z()]);
            std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
        })
        .collect();

    TemplateData {
        schema: TEMPLATE_FORMAT.to_string(),
        rest_vertices: vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        faces,
        parents: bones.iter().map(|b| b.parent).collect(),
        rest_joints,
        skinning_weights: weights,
        shape_basis,
        joint_regressor: regressor,
        keypoint_map,
        part_labels: labels,
        joint_frames: Some(frames),
    }
}

/// Ten linear shape components: overall scale, finger width, palm width,
/// palm length, thickness, thumb length, then per-finger lengths
/// (index, middle, ring, pinky).
fn shape_basis(vertices: &[Vector3<f64>], owner: &[usize], bones: &[Bone]) -> Vec<Vec<[f64; 3]>> {
    let finger_of = |joint: usize| -> Option<HandPart> { (joint != 0).then(|| bones[joint].part) };
    let along = |v: &Vector3<f64>, joint: usize| -> Vector3<f64> {
        let b = &bones[joint];
        b.axis * (v - b.start).dot(&b.axis)
    };
    let component = |f: &dyn Fn(usize, &Vector3<f64>) -> Vector3<f64>| -> Vec<[f64; 3]> {
        vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = f(i, v);
                [d.x, d.y, d.z]
            })
            .collect()
    };
    let thumb_base = Vector3::from(THUMB_BASE);
    let finger_length = |part: HandPart| {
        move |i: usize, v: &Vector3<f64>| {
            if finger_of(owner[i]) == Some(part) {
                Vector3::new(0.0, 0.05 * (v.y - PALM_LENGTH), 0.0)
            } else {
                Vector3::zeros()
            }
        }
    };
    vec![
        component(&|_, v| v * 0.05),
        component(&|i, v| {
            let j = owner[i];
            if j == 0 {
                return Vector3::zeros();
            }
            let l = lateral(&bones[j].axis);
            let offset = v - bones[j].start - along(v, j);
            l * (0.1 * offset.dot(&l))
        }),
        component(&|_, v| Vector3::new(0.05 * v.x, 0.0, 0.0)),
        component(&|i, v| {
            let j = owner[i];
            let moves = match finger_of(j) {
                Some(HandPart::Thumb) => false,
                Some(_) => true,
                None => v.y > PALM_LENGTH / 2.0,
            };
            if moves {
                Vector3::new(0.0, 0.004, 0.0)
            } else {
                Vector3::zeros()
            }
        }),
        component(&|_, v| Vector3::new(0.0, 0.0, 0.1 * v.z)),
        component(&|i, v| {
            if finger_of(owner[i]) == Some(HandPart::Thumb) {
                let u = thumb_axis();
                u * (0.05 * (v - thumb_base).dot(&u))
            } else {
                Vector3::zeros()
            }
        }),
        component(&finger_length(HandPart::Index)),
        component(&finger_length(HandPart::Middle)),
        component(&finger_length(HandPart::Ring)),
        component(&finger_length(HandPart::Pinky)),
    ]
}
