use nalgebra::{Matrix3, Vector3};
use std::sync::Arc;

use super::{HandState, KeypointSource, ModelError, PartMap, RiggedHandTemplate, NUM_JOINTS, NUM_KEYPOINTS};
use crate::geometry::{axis_angle_derivatives, axis_angle_to_matrix};

/// A posed hand. Faces are shared with the template.
#[derive(Clone, Debug)]
pub struct HandMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Arc<[[usize; 3]]>,
    /// Skeleton joints regressed from the posed vertices.
    pub joints: [Vector3<f64>; NUM_JOINTS],
    pub keypoints21: [Vector3<f64>; NUM_KEYPOINTS],
}

impl HandMesh {
    /// Copy with every vertex, joint and keypoint mapped through `f`.
    pub fn map_points(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> HandMesh {
        HandMesh {
            vertices: self.vertices.iter().map(&f).collect(),
            faces: self.faces.clone(),
            joints: self.joints.each_ref().map(&f),
            keypoints21: self.keypoints21.each_ref().map(&f),
        }
    }
}

/// Shaped rest skeleton and posed joint frames.
struct Kinematics {
    shaped: Vec<Vector3<f64>>,
    rest_joints: [Vector3<f64>; NUM_JOINTS],
    local: [Matrix3<f64>; NUM_JOINTS],
    world_rot: [Matrix3<f64>; NUM_JOINTS],
    world_pos: [Vector3<f64>; NUM_JOINTS],
}

fn check_state(template: &RiggedHandTemplate, state: &HandState) -> Result<(), ModelError> {
    state.validate()?;
    if state.shape.len() > template.shape_rank() {
        return Err(ModelError::Dimension(format!(
            "{} shape coefficients for a basis of rank {}",
            state.shape.len(),
            template.shape_rank()
        )));
    }
    Ok(())
}

fn kinematics(template: &RiggedHandTemplate, state: &HandState) -> Kinematics {
    let shaped = template.shaped_vertices(&state.shape);
    let rest_joints = template.regress_joints(&shaped);
    let local: [Matrix3<f64>; NUM_JOINTS] = std::array::from_fn(|j| {
        if j == 0 {
            axis_angle_to_matrix(&state.global_orient)
        } else {
            axis_angle_to_matrix(&state.pose[j - 1])
        }
    });
    let mut world_rot = [Matrix3::identity(); NUM_JOINTS];
    let mut world_pos = [Vector3::zeros(); NUM_JOINTS];
    let parents = template.parents();
    for &j in template.joint_order() {
        match parents[j] {
            None => {
                world_rot[j] = local[j];
                world_pos[j] = rest_joints[j];
            }
            Some(p) => {
                world_rot[j] = world_rot[p] * local[j];
                world_pos[j] = world_pos[p] + world_rot[p] * (rest_joints[j] - rest_joints[p]);
            }
        }
    }
    Kinematics {
        shaped,
        rest_joints,
        local,
        world_rot,
        world_pos,
    }
}

fn assemble_keypoints(
    template: &RiggedHandTemplate,
    vertices: &[Vector3<f64>],
    joints: &[Vector3<f64>; NUM_JOINTS],
) -> [Vector3<f64>; NUM_KEYPOINTS] {
    let map = template.keypoint_map();
    std::array::from_fn(|k| match &map[k] {
        KeypointSource::Joint(j) => joints[*j],
        KeypointSource::Vertices(vs) => vs.iter().fold(Vector3::zeros(), |acc, &(v, w)| acc + vertices[v] * w),
    })
}

/// Poses the template: shape blend, forward kinematics, linear blend
/// skinning, then translation. Joints are regressed from the posed vertices.
pub fn pose_mesh(template: &RiggedHandTemplate, state: &HandState) -> Result<HandMesh, ModelError> {
    check_state(template, state)?;
    let k = kinematics(template, state);
    // Per-joint affine map x ↦ A x + b.
    let offsets: [Vector3<f64>; NUM_JOINTS] =
        std::array::from_fn(|j| k.world_pos[j] - k.world_rot[j] * k.rest_joints[j] + state.translation);
    let vertices: Vec<Vector3<f64>> = k
        .shaped
        .iter()
        .zip(template.skinning_weights())
        .map(|(x, w)| {
            let mut out = Vector3::zeros();
            for j in 0..NUM_JOINTS {
                if w[j] != 0.0 {
                    out += (k.world_rot[j] * x + offsets[j]) * w[j];
                }
            }
            out
        })
        .collect();
    let joints = template.regress_joints(&vertices);
    let keypoints21 = assemble_keypoints(template, &vertices, &joints);
    Ok(HandMesh {
        vertices,
        faces: template.faces().clone(),
        joints,
        keypoints21,
    })
}

/// The 21-point keypoint layout of a posed mesh; index 0 is the wrist.
pub fn keypoints(mesh: &HandMesh) -> [Vector3<f64>; NUM_KEYPOINTS] {
    mesh.keypoints21
}

/// Derivatives of every posed vertex with respect to the state parameters,
/// laid out `[parameter][vertex]`.
#[derive(Clone, Debug)]
pub struct PoseDerivatives {
    /// 45 entries: joint `i + 1`, axis-angle component `c` at `3 * i + c`.
    pub pose: Vec<Vec<Vector3<f64>>>,
    /// One entry per shape coefficient of the state (empty when not requested).
    pub shape: Vec<Vec<Vector3<f64>>>,
    pub global_orient: Vec<Vec<Vector3<f64>>>,
}

impl PoseDerivatives {
    /// Maps vertex derivatives to keypoint derivatives through the regressor
    /// and keypoint map (both linear).
    pub fn keypoint_derivative(template: &RiggedHandTemplate, dv: &[Vector3<f64>]) -> [Vector3<f64>; NUM_KEYPOINTS] {
        let dj = template.regress_joints(dv);
        assemble_keypoints(template, dv, &dj)
    }
}

/// Closed-form derivatives of [`pose_mesh`] vertices. Translation derivatives
/// are the unit axes and are not stored.
pub fn vertex_derivatives(
    template: &RiggedHandTemplate,
    state: &HandState,
    with_shape: bool,
) -> Result<PoseDerivatives, ModelError> {
    check_state(template, state)?;
    let k = kinematics(template, state);
    let parents = template.parents();
    let order = template.joint_order();
    let weights = template.skinning_weights();

    let rotational = |joint: usize, d_local: &Matrix3<f64>| -> Vec<Vector3<f64>> {
        let mut affected = [false; NUM_JOINTS];
        let mut d_rot = [Matrix3::zeros(); NUM_JOINTS];
        let mut d_pos = [Vector3::zeros(); NUM_JOINTS];
        for &j in order {
            if j == joint {
                affected[j] = true;
                d_rot[j] = match parents[j] {
                    Some(p) => k.world_rot[p] * d_local,
                    None => *d_local,
                };
            } else if let Some(p) = parents[j].filter(|&p| affected[p]) {
                affected[j] = true;
                d_rot[j] = d_rot[p] * k.local[j];
                d_pos[j] = d_pos[p] + d_rot[p] * (k.rest_joints[j] - k.rest_joints[p]);
            }
        }
        k.shaped
            .iter()
            .zip(weights)
            .map(|(x, w)| {
                let mut out = Vector3::zeros();
                for j in 0..NUM_JOINTS {
                    if affected[j] && w[j] != 0.0 {
                        out += (d_pos[j] + d_rot[j] * (x - k.rest_joints[j])) * w[j];
                    }
                }
                out
            })
            .collect()
    };

    let mut pose = Vec::with_capacity(45);
    for (i, v) in state.pose.iter().enumerate() {
        for d in axis_angle_derivatives(v).iter() {
            pose.push(rotational(i + 1, d));
        }
    }
    let global_orient = axis_angle_derivatives(&state.global_orient)
        .iter()
        .map(|d| rotational(0, d))
        .collect();

    let mut shape = Vec::new();
    if with_shape {
        for comp in template.shape_basis().iter().take(state.shape.len()) {
            let dj = template.regress_joints(comp);
            let mut d_pos = [Vector3::zeros(); NUM_JOINTS];
            for &j in order {
                d_pos[j] = match parents[j] {
                    None => dj[j],
                    Some(p) => d_pos[p] + k.world_rot[p] * (dj[j] - dj[p]),
                };
            }
            shape.push(
                comp.iter()
                    .zip(weights)
                    .map(|(dx, w)| {
                        let mut out = Vector3::zeros();
                        for j in 0..NUM_JOINTS {
                            if w[j] != 0.0 {
                                out += (d_pos[j] + k.world_rot[j] * (dx - dj[j])) * w[j];
                            }
                        }
                        out
                    })
                    .collect(),
            );
        }
    }
    Ok(PoseDerivatives {
        pose,
        shape,
        global_orient,
    })
}

/// Area of every triangle.
pub fn face_areas(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> Vec<f64> {
    faces
        .iter()
        .map(|&[a, b, c]| 0.5 * (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a])).norm())
        .collect()
}

/// Total surface area per part.
pub fn part_areas(mesh: &HandMesh, template: &RiggedHandTemplate) -> PartMap<f64> {
    let mut out = PartMap::default();
    for (area, &part) in face_areas(&mesh.vertices, &mesh.faces).iter().zip(template.part_labels()) {
        out[part] += area;
    }
    out
}
