use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use super::{Finger, HandPart, ModelError, NUM_JOINTS, NUM_KEYPOINTS};
use crate::geometry::is_rotation;

/// Schema tag written at the head of every template file.
pub const TEMPLATE_FORMAT: &str = "dorsalkit.template/1";

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;
const REGRESSOR_TOLERANCE: f64 = 1e-6;

/// Names of the 21 keypoint slots.
pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "wrist",
    "thumb_cmc",
    "thumb_mcp",
    "thumb_ip",
    "thumb_tip",
    "index_mcp",
    "index_pip",
    "index_dip",
    "index_tip",
    "middle_mcp",
    "middle_pip",
    "middle_dip",
    "middle_tip",
    "ring_mcp",
    "ring_pip",
    "ring_dip",
    "ring_tip",
    "pinky_mcp",
    "pinky_pip",
    "pinky_dip",
    "pinky_tip",
];

/// Where a keypoint comes from: a skeleton joint or a fixed vertex blend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointSource {
    Joint(usize),
    Vertices(Vec<(usize, f64)>),
}

/// On-disk layout of a template. Arrays are row-major; lengths are checked by
/// [`RiggedHandTemplate::from_data`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemplateData {
    pub schema: String,
    pub rest_vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// Parent joint per joint; `null` marks the root.
    pub parents: Vec<Option<usize>>,
    pub rest_joints: Vec<[f64; 3]>,
    /// One row of `NUM_JOINTS` weights per vertex.
    pub skinning_weights: Vec<Vec<f64>>,
    /// `[component][vertex] -> displacement`.
    #[serde(default)]
    pub shape_basis: Vec<Vec<[f64; 3]>>,
    /// Sparse rows `(vertex, weight)` per joint.
    pub joint_regressor: Vec<Vec<(usize, f64)>>,
    pub keypoint_map: Vec<KeypointSource>,
    pub part_labels: Vec<HandPart>,
    /// Per-joint local frame (row-major 3×3) whose X column is the flexion
    /// axis. Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_frames: Option<Vec<[[f64; 3]; 3]>>,
}

/// Validated rest mesh and rig.
#[derive(Clone, Debug)]
pub struct RiggedHandTemplate {
    rest_vertices: Vec<Vector3<f64>>,
    faces: Arc<[[usize; 3]]>,
    parents: [Option<usize>; NUM_JOINTS],
    /// Joints ordered so every parent precedes its children.
    order: Vec<usize>,
    rest_joints: [Vector3<f64>; NUM_JOINTS],
    weights: Vec<[f64; NUM_JOINTS]>,
    shape_basis: Vec<Vec<Vector3<f64>>>,
    joint_regressor: Vec<Vec<(usize, f64)>>,
    keypoint_map: Vec<KeypointSource>,
    part_labels: Vec<HandPart>,
    joint_frames: [Matrix3<f64>; NUM_JOINTS],
}

fn vec3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl RiggedHandTemplate {
    pub fn from_data(data: TemplateData) -> Result<Self, ModelError> {
        if data.schema != TEMPLATE_FORMAT {
            return Err(ModelError::Format {
                found: data.schema,
                expected: TEMPLATE_FORMAT.to_string(),
            });
        }
        let nv = data.rest_vertices.len();
        if nv == 0 || data.faces.is_empty() {
            return Err(ModelError::Invalid("template has no vertices or faces".into()));
        }
        if data.rest_vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("rest_vertices"));
        }
        for (f, face) in data.faces.iter().enumerate() {
            if face.iter().any(|&v| v >= nv) {
                return Err(ModelError::IndexOutOfRange(format!("face {f} references a missing vertex")));
            }
        }

        let parents: [Option<usize>; NUM_JOINTS] = data.parents.clone().try_into().map_err(|p: Vec<_>| {
            ModelError::Dimension(format!("expected {NUM_JOINTS} parents, got {}", p.len()))
        })?;
        let order = topological_order(&parents)?;

        if data.rest_joints.len() != NUM_JOINTS {
            return Err(ModelError::Dimension(format!(
                "expected {NUM_JOINTS} rest joints, got {}",
                data.rest_joints.len()
            )));
        }
        let rest_joints: [Vector3<f64>; NUM_JOINTS] = std::array::from_fn(|j| vec3(&data.rest_joints[j]));

        if data.skinning_weights.len() != nv {
            return Err(ModelError::Dimension(format!(
                "expected {nv} skinning rows, got {}",
                data.skinning_weights.len()
            )));
        }
        let mut weights = Vec::with_capacity(nv);
        for (v, row) in data.skinning_weights.iter().enumerate() {
            let row: [f64; NUM_JOINTS] = row.as_slice().try_into().map_err(|_| {
                ModelError::Dimension(format!("skinning row {v} has {} entries", row.len()))
            })?;
            if let Some(joint) = row.iter().position(|&w| !(w >= 0.0)) {
                return Err(ModelError::NegativeWeight { vertex: v, joint });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(ModelError::WeightsNotNormalized { vertex: v, sum });
            }
            weights.push(row);
        }

        let mut shape_basis = Vec::with_capacity(data.shape_basis.len());
        for (k, comp) in data.shape_basis.iter().enumerate() {
            if comp.len() != nv {
                return Err(ModelError::Dimension(format!(
                    "shape component {k} has {} displacements for {nv} vertices",
                    comp.len()
                )));
            }
            if comp.iter().flatten().any(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite("shape_basis"));
            }
            shape_basis.push(comp.iter().map(vec3).collect());
        }

        if data.joint_regressor.len() != NUM_JOINTS {
            return Err(ModelError::Dimension(format!(
                "expected {NUM_JOINTS} regressor rows, got {}",
                data.joint_regressor.len()
            )));
        }
        for (j, row) in data.joint_regressor.iter().enumerate() {
            if row.iter().any(|&(v, _)| v >= nv) {
                return Err(ModelError::IndexOutOfRange(format!("regressor row {j} references a missing vertex")));
            }
        }

        if data.keypoint_map.len() != NUM_KEYPOINTS {
            return Err(ModelError::Dimension(format!(
                "keypoint map needs {NUM_KEYPOINTS} entries, got {}",
                data.keypoint_map.len()
            )));
        }
        for (k, src) in data.keypoint_map.iter().enumerate() {
            let ok = match src {
                KeypointSource::Joint(j) => *j < NUM_JOINTS,
                KeypointSource::Vertices(vs) => !vs.is_empty() && vs.iter().all(|&(v, _)| v < nv),
            };
            if !ok {
                return Err(ModelError::IndexOutOfRange(format!("keypoint {k} has an invalid source")));
            }
        }

        if data.part_labels.len() != data.faces.len() {
            return Err(ModelError::Dimension(format!(
                "{} part labels for {} faces",
                data.part_labels.len(),
                data.faces.len()
            )));
        }

        let joint_frames = match &data.joint_frames {
            None => [Matrix3::identity(); NUM_JOINTS],
            Some(frames) => {
                if frames.len() != NUM_JOINTS {
                    return Err(ModelError::Dimension(format!("expected {NUM_JOINTS} joint frames")));
                }
                let mut out = [Matrix3::identity(); NUM_JOINTS];
                for (j, rows) in frames.iter().enumerate() {
                    let m = Matrix3::from_fn(|r, c| rows[r][c]);
                    if !is_rotation(&m, 1e-9) {
                        return Err(ModelError::Invalid(format!("joint frame {j} is not a rotation")));
                    }
                    out[j] = m;
                }
                out
            }
        };

        let template = RiggedHandTemplate {
            rest_vertices: data.rest_vertices.iter().map(vec3).collect(),
            faces: data.faces.into(),
            parents,
            order,
            rest_joints,
            weights,
            shape_basis,
            joint_regressor: data.joint_regressor,
            keypoint_map: data.keypoint_map,
            part_labels: data.part_labels,
            joint_frames,
        };

        let regressed = template.regress_joints(&template.rest_vertices);
        for (j, (r, rest)) in regressed.iter().zip(&template.rest_joints).enumerate() {
            if (r - rest).norm() > REGRESSOR_TOLERANCE {
                return Err(ModelError::Invalid(format!(
                    "rest joint {j} disagrees with the joint regressor by {:.3e} m",
                    (r - rest).norm()
                )));
            }
        }
        Ok(template)
    }

    pub fn to_data(&self) -> TemplateData {
        let arr = |v: &Vector3<f64>| [v.x, v.y, v.z];
        let identity_frames = self.joint_frames.iter().all(|m| *m == Matrix3::identity());
        TemplateData {
            schema: TEMPLATE_FORMAT.to_string(),
            rest_vertices: self.rest_vertices.iter().map(arr).collect(),
            faces: self.faces.to_vec(),
            parents: self.parents.to_vec(),
            rest_joints: self.rest_joints.iter().map(arr).collect(),
            skinning_weights: self.weights.iter().map(|w| w.to_vec()).collect(),
            shape_basis: self
                .shape_basis
                .iter()
                .map(|c| c.iter().map(arr).collect())
                .collect(),
            joint_regressor: self.joint_regressor.clone(),
            keypoint_map: self.keypoint_map.clone(),
            part_labels: self.part_labels.clone(),
            joint_frames: (!identity_frames).then(|| {
                self.joint_frames
                    .iter()
                    .map(|m| std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])))
                    .collect()
            }),
        }
    }

    /// Reads and validates a template file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_data(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_data()).expect("template serializes")
    }

    pub fn rest_vertices(&self) -> &[Vector3<f64>] {
        &self.rest_vertices
    }

    pub fn faces(&self) -> &Arc<[[usize; 3]]> {
        &self.faces
    }

    pub fn parents(&self) -> &[Option<usize>; NUM_JOINTS] {
        &self.parents
    }

    pub(crate) fn joint_order(&self) -> &[usize] {
        &self.order
    }

    pub fn rest_joints(&self) -> &[Vector3<f64>; NUM_JOINTS] {
        &self.rest_joints
    }

    pub fn skinning_weights(&self) -> &[[f64; NUM_JOINTS]] {
        &self.weights
    }

    pub fn shape_basis(&self) -> &[Vec<Vector3<f64>>] {
        &self.shape_basis
    }

    pub fn shape_rank(&self) -> usize {
        self.shape_basis.len()
    }

    pub fn joint_regressor(&self) -> &[Vec<(usize, f64)>] {
        &self.joint_regressor
    }

    pub fn keypoint_map(&self) -> &[KeypointSource] {
        &self.keypoint_map
    }

    pub fn part_labels(&self) -> &[HandPart] {
        &self.part_labels
    }

    pub fn joint_frame(&self, joint: usize) -> &Matrix3<f64> {
        &self.joint_frames[joint]
    }

    pub fn vertex_count(&self) -> usize {
        self.rest_vertices.len()
    }

    /// Applies the joint regressor to an arbitrary vertex set.
    pub fn regress_joints(&self, vertices: &[Vector3<f64>]) -> [Vector3<f64>; NUM_JOINTS] {
        std::array::from_fn(|j| {
            self.joint_regressor[j]
                .iter()
                .fold(Vector3::zeros(), |acc, &(v, w)| acc + vertices[v] * w)
        })
    }

    /// Rest vertices displaced by the shape basis.
    pub fn shaped_vertices(&self, shape: &[f64]) -> Vec<Vector3<f64>> {
        let mut out = self.rest_vertices.clone();
        for (comp, &beta) in self.shape_basis.iter().zip(shape) {
            if beta != 0.0 {
                for (v, d) in out.iter_mut().zip(comp) {
                    *v += d * beta;
                }
            }
        }
        out
    }

    /// Skeleton joint driving a finger's knuckle keypoint.
    pub fn mcp_joint(&self, finger: Finger) -> Option<usize> {
        match self.keypoint_map[finger.mcp_keypoint()] {
            KeypointSource::Joint(j) => Some(j),
            KeypointSource::Vertices(_) => None,
        }
    }

    /// Layout name of the keypoint sourced from `joint`, if any.
    pub fn joint_name(&self, joint: usize) -> String {
        self.keypoint_map
            .iter()
            .position(|s| *s == KeypointSource::Joint(joint))
            .map(|k| KEYPOINT_NAMES[k].to_string())
            .unwrap_or_else(|| format!("joint_{joint}"))
    }
}

fn topological_order(parents: &[Option<usize>; NUM_JOINTS]) -> Result<Vec<usize>, ModelError> {
    let roots: Vec<usize> = (0..NUM_JOINTS).filter(|&j| parents[j].is_none()).collect();
    if roots.len() != 1 {
        return Err(ModelError::NotATree(format!("expected exactly one root, found {}", roots.len())));
    }
    if let Some(j) = (0..NUM_JOINTS).find(|&j| parents[j].is_some_and(|p| p >= NUM_JOINTS || p == j)) {
        return Err(ModelError::NotATree(format!("joint {j} has an invalid parent")));
    }
    if roots[0] != 0 {
        return Err(ModelError::NotATree(format!("root must be joint 0, found joint {}", roots[0])));
    }
    let mut order = roots.clone();
    let mut head = 0;
    while head < order.len() {
        let p = order[head];
        order.extend((0..NUM_JOINTS).filter(|&c| parents[c] == Some(p)));
        head += 1;
    }
    if order.len() != NUM_JOINTS {
        return Err(ModelError::NotATree(format!(
            "{} joints unreachable from the root (cycle)",
            NUM_JOINTS - order.len()
        )));
    }
    Ok(order)
}
