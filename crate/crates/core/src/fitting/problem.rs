use nalgebra::{DMatrix, DVector, Vector3};

use super::{FitConfig, FitError, FitTargets, JacobianMode, KeypointTargets, MarkerTargets};
use crate::hand_model::{
    pose_mesh, vertex_derivatives, HandState, PoseDerivatives, RiggedHandTemplate, NUM_KEYPOINTS, NUM_POSE_JOINTS,
};

const POSE_PARAMS: usize = 3 * NUM_POSE_JOINTS;

/// `‖J − Ĵ‖²` (confidence weighted) `+ λ_θ‖θ‖² + λ_β‖β‖²`.
pub fn objective_keypoints(
    template: &RiggedHandTemplate,
    state: &HandState,
    targets: &KeypointTargets,
    cfg: &FitConfig,
) -> Result<f64, FitError> {
    let problem = FitProblem::new(template, FitTargets::Keypoints(targets.clone()), state, cfg)?;
    problem.objective(state)
}

/// `‖M − M̂‖² + λ_θ‖θ‖²`; the state's shape is used as given.
pub fn objective_markers(
    template: &RiggedHandTemplate,
    state: &HandState,
    targets: &MarkerTargets,
    cfg: &FitConfig,
) -> Result<f64, FitError> {
    let problem = FitProblem::new(template, FitTargets::Markers(targets.clone()), state, cfg)?;
    problem.objective(state)
}

/// A least-squares problem over the flattened parameter vector
/// `[θ (45), β (keypoint fits only), global orientation (3), translation (3)]`.
///
/// Residuals are `√w (J − Ĵ)`, `√λ_θ θ` and `√λ_β β`, so the objective is
/// their squared norm.
pub struct FitProblem<'a> {
    template: &'a RiggedHandTemplate,
    targets: FitTargets,
    /// Shape held fixed for marker fits.
    fixed_shape: Vec<f64>,
    shape_params: usize,
    sqrt_pose: f64,
    sqrt_shape: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        template: &'a RiggedHandTemplate,
        targets: FitTargets,
        init: &HandState,
        cfg: &FitConfig,
    ) -> Result<Self, FitError> {
        cfg.validate()?;
        init.validate()?;
        if init.shape.len() > template.shape_rank() {
            return Err(FitError::Config(format!(
                "state has {} shape coefficients but the template has {}",
                init.shape.len(),
                template.shape_rank()
            )));
        }
        let shape_params = match &targets {
            FitTargets::Keypoints(t) => {
                t.validate()?;
                init.shape.len()
            }
            FitTargets::Markers(m) => {
                m.validate(template.vertex_count())?;
                0
            }
        };
        Ok(Self {
            template,
            targets,
            fixed_shape: init.shape.clone(),
            shape_params,
            sqrt_pose: cfg.reg_pose_weight.sqrt(),
            sqrt_shape: cfg.reg_shape_weight.sqrt(),
        })
    }

    pub fn param_count(&self) -> usize {
        POSE_PARAMS + self.shape_params + 6
    }

    fn data_rows(&self) -> usize {
        match &self.targets {
            FitTargets::Keypoints(_) => 3 * NUM_KEYPOINTS,
            FitTargets::Markers(m) => 3 * m.points.len(),
        }
    }

    pub fn residual_count(&self) -> usize {
        self.data_rows() + POSE_PARAMS + self.shape_params
    }

    pub fn pack(&self, state: &HandState) -> DVector<f64> {
        let mut x = DVector::zeros(self.param_count());
        for (i, v) in state.pose.iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * i).copy_from(v);
        }
        for b in 0..self.shape_params {
            x[POSE_PARAMS + b] = state.shape[b];
        }
        let o = POSE_PARAMS + self.shape_params;
        x.fixed_rows_mut::<3>(o).copy_from(&state.global_orient);
        x.fixed_rows_mut::<3>(o + 3).copy_from(&state.translation);
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> HandState {
        let o = POSE_PARAMS + self.shape_params;
        HandState {
            pose: std::array::from_fn(|i| x.fixed_rows::<3>(3 * i).into_owned()),
            shape: if self.shape_params > 0 {
                x.rows(POSE_PARAMS, self.shape_params).iter().copied().collect()
            } else {
                self.fixed_shape.clone()
            },
            global_orient: x.fixed_rows::<3>(o).into_owned(),
            translation: x.fixed_rows::<3>(o + 3).into_owned(),
        }
    }

    pub fn objective(&self, state: &HandState) -> Result<f64, FitError> {
        Ok(self.residuals(&self.pack(state))?.norm_squared())
    }

    pub fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>, FitError> {
        let state = self.unpack(x);
        let mesh = pose_mesh(self.template, &state)?;
        let mut r = DVector::zeros(self.residual_count());
        match &self.targets {
            FitTargets::Keypoints(t) => {
                for i in 0..NUM_KEYPOINTS {
                    let w = t.weight(i);
                    if w > 0.0 {
                        r.fixed_rows_mut::<3>(3 * i).copy_from(&((mesh.keypoints21[i] - t.points[i]) * w.sqrt()));
                    }
                }
            }
            FitTargets::Markers(m) => {
                for (k, (&v, p)) in m.vertex_ids.iter().zip(&m.points).enumerate() {
                    r.fixed_rows_mut::<3>(3 * k).copy_from(&(mesh.vertices[v] - p));
                }
            }
        }
        let d = self.data_rows();
        for i in 0..POSE_PARAMS {
            r[d + i] = self.sqrt_pose * x[i];
        }
        for b in 0..self.shape_params {
            r[d + POSE_PARAMS + b] = self.sqrt_shape * x[POSE_PARAMS + b];
        }
        Ok(r)
    }

    pub fn jacobian(&self, x: &DVector<f64>, mode: JacobianMode) -> Result<DMatrix<f64>, FitError> {
        match mode {
            JacobianMode::CentralDifference { step } => self.jacobian_central(x, step),
            JacobianMode::Analytic => self.jacobian_analytic(x),
        }
    }

    fn jacobian_central(&self, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>, FitError> {
        let mut jac = DMatrix::zeros(self.residual_count(), self.param_count());
        let mut probe = x.clone();
        for c in 0..self.param_count() {
            probe[c] = x[c] + step;
            let plus = self.residuals(&probe)?;
            probe[c] = x[c] - step;
            let minus = self.residuals(&probe)?;
            probe[c] = x[c];
            jac.set_column(c, &((plus - minus) / (2.0 * step)));
        }
        Ok(jac)
    }

    fn jacobian_analytic(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, FitError> {
        let state = self.unpack(x);
        let derivs = vertex_derivatives(self.template, &state, self.shape_params > 0)?;
        let mut jac = DMatrix::zeros(self.residual_count(), self.param_count());
        let o = POSE_PARAMS + self.shape_params;
        let columns = derivs
            .pose
            .iter()
            .enumerate()
            .chain(derivs.shape.iter().enumerate().map(|(b, d)| (POSE_PARAMS + b, d)))
            .chain(derivs.global_orient.iter().enumerate().map(|(c, d)| (o + c, d)));
        for (col, dv) in columns {
            let points = self.data_derivatives(dv);
            self.fill_data_column(&mut jac, col, |i| points[i]);
        }
        for axis in 0..3 {
            let unit = Vector3::ith(axis, 1.0);
            self.fill_data_column(&mut jac, o + 3 + axis, |_| unit);
        }
        let d = self.data_rows();
        for i in 0..POSE_PARAMS {
            jac[(d + i, i)] = self.sqrt_pose;
        }
        for b in 0..self.shape_params {
            jac[(d + POSE_PARAMS + b, POSE_PARAMS + b)] = self.sqrt_shape;
        }
        Ok(jac)
    }

    /// Derivatives of every data point for one vertex-derivative field.
    fn data_derivatives(&self, dv: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        match &self.targets {
            FitTargets::Keypoints(_) => PoseDerivatives::keypoint_derivative(self.template, dv).to_vec(),
            FitTargets::Markers(m) => m.vertex_ids.iter().map(|&v| dv[v]).collect(),
        }
    }

    fn fill_data_column(&self, jac: &mut DMatrix<f64>, col: usize, f: impl Fn(usize) -> Vector3<f64>) {
        match &self.targets {
            FitTargets::Keypoints(t) => {
                for i in 0..NUM_KEYPOINTS {
                    let w = t.weight(i);
                    if w > 0.0 {
                        jac.fixed_view_mut::<3, 1>(3 * i, col).copy_from(&(f(i) * w.sqrt()));
                    }
                }
            }
            FitTargets::Markers(m) => {
                for k in 0..m.points.len() {
                    jac.fixed_view_mut::<3, 1>(3 * k, col).copy_from(&f(k));
                }
            }
        }
    }
}
