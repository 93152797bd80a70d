use nalgebra::{DMatrix, DVector};

use super::{FitConfig, FitError, FitProblem, FitResult, FitTargets, IterationRecord};
use crate::geometry::procrustes;
use crate::hand_model::{pose_mesh, HandState, KeypointSource, RiggedHandTemplate};

/// Damping beyond which no descent direction is expected to exist.
const MAX_DAMPING: f64 = 1e16;

/// Minimizes the keypoint or marker objective from `init`.
///
/// Levenberg–Marquardt with Marquardt diagonal scaling: damping is divided by
/// 10 after an accepted step and multiplied by 10 after a rejected one. Only
/// steps that lower the objective are accepted, so the objective never rises
/// within a stage.
///
/// With `continuation = k`, the problem is first solved with both
/// regularizer weights multiplied by `10^k, ..., 10`, each stage starting from
/// the previous solution, and finally with the configured weights. Each stage
/// gets `max_iterations`; `converged` reports the final stage. Exhausting the
/// budget returns the best state with `converged = false`.
pub fn fit(
    template: &RiggedHandTemplate,
    targets: &FitTargets,
    init: &HandState,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let stages: Vec<FitConfig> = (0..=cfg.continuation)
        .rev()
        .map(|k| {
            let factor = 10f64.powi(k as i32);
            FitConfig {
                reg_pose_weight: cfg.reg_pose_weight * factor,
                reg_shape_weight: cfg.reg_shape_weight * factor,
                ..*cfg
            }
        })
        .collect();

    let mut state = init.clone();
    let mut log = Vec::new();
    let mut iterations = 0;
    let mut last = None;
    for (stage, stage_cfg) in stages.iter().enumerate() {
        let problem = FitProblem::new(template, targets.clone(), &state, stage_cfg)?;
        let mut x = problem.pack(&state);
        if stage == 0 && cfg.rigid_init {
            if let Some(aligned) = rigid_alignment(template, targets, &state)? {
                let xa = problem.pack(&aligned);
                let (fa, f0) = (problem.residuals(&xa)?.norm_squared(), problem.residuals(&x)?.norm_squared());
                if fa.is_finite() && (fa < f0 || !f0.is_finite()) {
                    x = xa;
                }
            }
        }
        let outcome = minimize(&problem, x, stage_cfg, stage, &mut log)?;
        iterations += outcome.iterations;
        state = problem.unpack(&outcome.x);
        last = Some(outcome);
    }
    let last = last.expect("at least one stage");
    if !last.converged {
        log::debug!("fit stopped without converging (objective {:e})", last.objective);
    }
    Ok(FitResult {
        state,
        final_objective: last.objective,
        iterations,
        converged: last.converged,
        log,
    })
}

struct StageOutcome {
    x: DVector<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

fn minimize(
    problem: &FitProblem,
    mut x: DVector<f64>,
    cfg: &FitConfig,
    stage: usize,
    log: &mut Vec<IterationRecord>,
) -> Result<StageOutcome, FitError> {
    let mut r = problem.residuals(&x)?;
    let mut f = r.norm_squared();
    if !f.is_finite() {
        return Err(FitError::NonFiniteInit);
    }
    let mut damping = cfg.damping_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        if f == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jac = problem.jacobian(&x, cfg.jacobian)?;
        let jtj = jac.tr_mul(&jac);
        let gradient = jac.tr_mul(&r);

        let mut rejected = 0;
        let mut accepted = None;
        while damping <= MAX_DAMPING {
            if let Some(step) = damped_step(&jtj, &gradient, damping) {
                let candidate = &x + &step;
                let r_new = problem.residuals(&candidate)?;
                let f_new = r_new.norm_squared();
                if f_new.is_finite() && f_new < f {
                    accepted = Some((candidate, r_new, f_new, step.norm()));
                    break;
                }
            }
            rejected += 1;
            damping *= 10.0;
        }

        let Some((x_new, r_new, f_new, step_norm)) = accepted else {
            // No damping level lowers the objective: a numerical minimum.
            log.push(IterationRecord {
                stage,
                iteration: iterations,
                objective: f,
                damping,
                step_norm: 0.0,
                rejected_steps: rejected,
            });
            converged = true;
            break;
        };
        let decrease = f - f_new;
        let f_prev = f;
        x = x_new;
        r = r_new;
        f = f_new;
        damping = (damping / 10.0).max(1e-15);
        log.push(IterationRecord {
            stage,
            iteration: iterations,
            objective: f,
            damping,
            step_norm,
            rejected_steps: rejected,
        });
        if step_norm < cfg.step_tolerance || decrease <= cfg.residual_tolerance * f_prev {
            converged = true;
            break;
        }
    }
    Ok(StageOutcome {
        x,
        objective: f,
        iterations,
        converged,
    })
}

/// `init` moved rigidly so that its root-attached points best match their
/// targets, or `None` when fewer than three such points carry weight.
fn rigid_alignment(
    template: &RiggedHandTemplate,
    targets: &FitTargets,
    init: &HandState,
) -> Result<Option<HandState>, FitError> {
    let mesh = pose_mesh(template, init)?;
    let parents = template.parents();
    let on_root = |j: usize| j == 0 || parents[j] == Some(0);
    let (mut src, mut dst, mut w) = (Vec::new(), Vec::new(), Vec::new());
    match targets {
        FitTargets::Keypoints(t) => {
            for (i, source) in template.keypoint_map().iter().enumerate() {
                if matches!(source, KeypointSource::Joint(j) if on_root(*j)) && t.weight(i) > 0.0 {
                    src.push(mesh.keypoints21[i]);
                    dst.push(t.points[i]);
                    w.push(t.weight(i));
                }
            }
        }
        FitTargets::Markers(m) => {
            let weights = template.skinning_weights();
            for (&v, p) in m.vertex_ids.iter().zip(&m.points) {
                if weights[v][0] >= 1.0 - 1e-9 {
                    src.push(mesh.vertices[v]);
                    dst.push(*p);
                    w.push(1.0);
                }
            }
        }
    }
    if src.len() < 3 {
        return Ok(None);
    }
    let Some(sim) = procrustes(&src, &dst, Some(&w), false) else {
        return Ok(None);
    };
    let wrist = template.regress_joints(&template.shaped_vertices(&init.shape))[0];
    Ok(Some(init.rigidly_moved(&sim.rotation, &sim.translation, &wrist)))
}

/// Solves `(JᵀJ + μ diag(JᵀJ)) δ = −Jᵀr`.
fn damped_step(jtj: &DMatrix<f64>, gradient: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let scale = jtj.diagonal().iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-300);
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        // Floor keeps directions the data does not constrain solvable.
        let d = jtj[(i, i)].max(1e-12 * scale);
        a[(i, i)] += damping * d;
    }
    let chol = a.cholesky()?;
    let step = -chol.solve(gradient);
    step.iter().all(|v| v.is_finite()).then_some(step)
}
