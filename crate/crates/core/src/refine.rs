//! Robust pose refinement.
//!
//! [`lmpe`] minimizes `sum_i huber(r_i(T))` with Levenberg-Marquardt, where
//! `r_i` is the pixel distance between an observation and the reprojection of
//! its landmark. [`sa_lmpe`] wraps it in an annealing loop: after every solve,
//! correspondences whose residual exceeds `eps` are dropped, then `delta` and
//! `eps` are cooled geometrically towards their floors.
//!
//! The pose is updated on its tangent space: `R <- exp(omega) R`, `t <- t + dt`.
//! Normal equations use iteratively reweighted Gauss-Newton, which gives the
//! exact gradient of the Huber objective and the usual positive semi-definite
//! curvature approximation.

use nalgebra::{Matrix2x3, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{skew, Camera, Correspondence, LandmarkSet, Pose, Vec2, Vec3};

/// Residual assigned to a correspondence whose landmark is behind the camera.
pub const CHEIRALITY_RESIDUAL_PX: f64 = 1e4;
/// Minimum number of correspondences LMPE accepts and pruning may leave.
pub const MIN_CORRESPONDENCES: usize = 4;

/// Huber scale, pixels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HuberParam(f64);

impl HuberParam {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "huber delta must be positive, got {delta}"
            )));
        }
        Ok(Self(delta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Quadratic for `|r| <= delta`, linear beyond.
pub fn huber(r: f64, delta: HuberParam) -> f64 {
    let d = delta.0;
    let a = r.abs();
    if a <= d {
        0.5 * r * r
    } else {
        d * a - 0.5 * d * d
    }
}

/// IRLS weight `psi(r) / r`.
fn huber_weight(r: f64, delta: f64) -> f64 {
    if r <= delta {
        1.0
    } else {
        delta / r
    }
}

/// Pixel distance between the observation and the reprojected landmark.
pub fn residual(
    pose: &Pose,
    c: &Correspondence,
    landmarks: &LandmarkSet,
    camera: &Camera,
) -> Result<f64> {
    let x = landmarks.get(c.landmark_index)?;
    let uv = camera.project_camera_point(&pose.transform_point(x))?;
    Ok((c.image_point - uv).norm())
}

/// Residuals for every correspondence; cheirality violations map to infinity.
pub fn residuals(
    pose: &Pose,
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
) -> Result<Vec<f64>> {
    correspondences
        .iter()
        .map(|c| match residual(pose, c, landmarks, camera) {
            Err(Error::Cheirality { .. }) => Ok(f64::INFINITY),
            other => other,
        })
        .collect()
}

/// Landmark positions resolved once per solve.
struct Problem<'a> {
    points: Vec<Vec3>,
    observed: Vec<Vec2>,
    camera: &'a Camera,
}

impl<'a> Problem<'a> {
    fn new(
        correspondences: &[Correspondence],
        landmarks: &LandmarkSet,
        camera: &'a Camera,
    ) -> Result<Self> {
        let points = correspondences
            .iter()
            .map(|c| landmarks.get(c.landmark_index).copied())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            observed: correspondences.iter().map(|c| c.image_point).collect(),
            camera,
        })
    }

    /// Reprojection error vector and its tangent-space Jacobian, or `None`
    /// when the point is not in front of the camera.
    fn error_and_jacobian(&self, pose: &Pose, i: usize) -> Option<(Vec2, nalgebra::Matrix2x6<f64>)> {
        let rotated = pose.rotation.rotate(&self.points[i]);
        let p = rotated + pose.translation;
        if !(p.z > 0.0) {
            return None;
        }
        let cam = self.camera;
        let inv_z = 1.0 / p.z;
        let e = Vec2::new(
            cam.fx * p.x * inv_z + cam.cx - self.observed[i].x,
            cam.fy * p.y * inv_z + cam.cy - self.observed[i].y,
        );
        let dproj = Matrix2x3::new(
            cam.fx * inv_z,
            0.0,
            -cam.fx * p.x * inv_z * inv_z,
            0.0,
            cam.fy * inv_z,
            -cam.fy * p.y * inv_z * inv_z,
        );
        let mut j = nalgebra::Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0)
            .copy_from(&(dproj * -skew(&rotated)));
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
        Some((e, j))
    }

    fn residual(&self, pose: &Pose, i: usize) -> f64 {
        let p = pose.transform_point(&self.points[i]);
        match self.camera.project_camera_point(&p) {
            Ok(uv) => (self.observed[i] - uv).norm(),
            Err(_) => CHEIRALITY_RESIDUAL_PX,
        }
    }

    fn objective(&self, pose: &Pose, delta: HuberParam) -> f64 {
        (0..self.points.len())
            .map(|i| huber(self.residual(pose, i), delta))
            .sum()
    }

    fn linearize(&self, pose: &Pose, delta: HuberParam) -> Linearization {
        let mut lin = Linearization {
            objective: 0.0,
            hessian: Matrix6::zeros(),
            gradient: Vector6::zeros(),
        };
        for i in 0..self.points.len() {
            match self.error_and_jacobian(pose, i) {
                Some((e, j)) => {
                    let r = e.norm();
                    let w = huber_weight(r, delta.0);
                    lin.objective += huber(r, delta);
                    lin.hessian += w * j.transpose() * j;
                    lin.gradient += w * j.transpose() * e;
                }
                // capped residual is constant, so it carries no gradient
                None => lin.objective += huber(CHEIRALITY_RESIDUAL_PX, delta),
            }
        }
        lin
    }
}

struct Linearization {
    objective: f64,
    hessian: Matrix6<f64>,
    gradient: Vector6<f64>,
}

/// Huber objective `sum_i huber(r_i(pose))`.
pub fn objective(
    pose: &Pose,
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    delta: HuberParam,
) -> Result<f64> {
    Ok(Problem::new(correspondences, landmarks, camera)?.objective(pose, delta))
}

/// Analytic gradient of [`objective`] with respect to the tangent increment
/// `[omega, dt]` used by [`Pose::retract`].
pub fn objective_gradient(
    pose: &Pose,
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    delta: HuberParam,
) -> Result<Vector6<f64>> {
    Ok(Problem::new(correspondences, landmarks, camera)?
        .linearize(pose, delta)
        .gradient)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmpeConfig {
    pub initial_damping: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this fraction.
    pub min_relative_decrease: f64,
}

impl Default for LmpeConfig {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            max_iterations: 50,
            min_relative_decrease: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmpeOutcome {
    pub pose: Pose,
    pub converged: bool,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
}

/// Objective below which the fit is treated as exact.
const EXACT_FIT_OBJECTIVE: f64 = 1e-18;

pub fn lmpe(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    start: &Pose,
    delta: HuberParam,
) -> Result<LmpeOutcome> {
    lmpe_with(
        correspondences,
        landmarks,
        camera,
        start,
        delta,
        &LmpeConfig::default(),
    )
}

pub fn lmpe_with(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    start: &Pose,
    delta: HuberParam,
    config: &LmpeConfig,
) -> Result<LmpeOutcome> {
    if correspondences.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData {
            needed: MIN_CORRESPONDENCES,
            got: correspondences.len(),
        });
    }
    let problem = Problem::new(correspondences, landmarks, camera)?;
    let mut pose = *start;
    let mut lin = problem.linearize(&pose, delta);
    check_rank(&lin.hessian)?;

    let initial_objective = lin.objective;
    let mut damping = config.initial_damping;
    let mut iterations = 0;
    let mut accepted_steps = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        if lin.objective <= EXACT_FIT_OBJECTIVE {
            converged = true;
            break;
        }
        iterations += 1;

        let mut damped = lin.hessian;
        for d in 0..6 {
            damped[(d, d)] += damping * lin.hessian[(d, d)].max(1e-12);
        }
        let Some(chol) = damped.cholesky() else {
            damping *= 10.0;
            continue;
        };
        let step = chol.solve(&(-lin.gradient));
        let candidate = pose.retract(&step);
        let candidate_objective = problem.objective(&candidate, delta);

        if candidate_objective < lin.objective {
            let relative = (lin.objective - candidate_objective) / lin.objective;
            pose = candidate;
            lin = problem.linearize(&pose, delta);
            accepted_steps += 1;
            damping = (damping * 0.1).max(1e-15);
            if relative < config.min_relative_decrease {
                converged = true;
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e16 {
                // no descent direction left at machine precision
                converged = true;
                break;
            }
        }
    }

    Ok(LmpeOutcome {
        pose,
        converged,
        iterations,
        accepted_steps,
        initial_objective,
        final_objective: lin.objective,
    })
}

fn check_rank(hessian: &Matrix6<f64>) -> Result<()> {
    let diag = hessian.diagonal();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Degenerate(
            "pose Jacobian has a zero column".into(),
        ));
    }
    let scale = diag.map(|d| 1.0 / d.sqrt());
    let normalized = Matrix6::from_fn(|r, c| hessian[(r, c)] * scale[r] * scale[c]);
    let eig = normalized.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if !(min > 1e-10 * max) {
        return Err(Error::Degenerate(format!(
            "pose Jacobian is rank deficient (eigenvalue ratio {:.3e})",
            min / max
        )));
    }
    Ok(())
}

/// Cooling schedule for [`sa_lmpe`]. Defaults are delta 5 -> 1 px and
/// eps 50 -> 4 px, both cooled by 0.7, over 10 iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub delta0: f64,
    pub eps0: f64,
    pub delta_min: f64,
    pub eps_min: f64,
    pub lambda_delta: f64,
    pub lambda_eps: f64,
    pub t_max: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            delta0: 5.0,
            eps0: 50.0,
            delta_min: 1.0,
            eps_min: 4.0,
            lambda_delta: 0.7,
            lambda_eps: 0.7,
            t_max: 10,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("delta0", self.delta0)?;
        positive("eps0", self.eps0)?;
        positive("delta_min", self.delta_min)?;
        positive("eps_min", self.eps_min)?;
        for (name, v) in [("lambda_delta", self.lambda_delta), ("lambda_eps", self.lambda_eps)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        Ok(())
    }

    /// `(delta, eps)` in effect during each of the `t_max` iterations.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let (mut delta, mut eps) = (self.delta0, self.eps0);
        (0..self.t_max)
            .map(|_| {
                let current = (delta, eps);
                delta = self.delta_min.max(self.lambda_delta * delta);
                eps = self.eps_min.max(self.lambda_eps * eps);
                current
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta: f64,
    pub eps: f64,
    /// Pose after this iteration's LMPE solve.
    pub pose: Pose,
    /// Huber objective over the active set at the end of the solve.
    pub objective: f64,
    pub active: usize,
    pub removed: usize,
    /// Pruning would have left fewer than four correspondences.
    pub pruning_skipped: bool,
    pub converged: bool,
    /// RMS residual of the correspondences kept after this iteration.
    pub rms_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub pose: Pose,
    pub surviving: Vec<Correspondence>,
    /// Positions of `surviving` in the input slice.
    pub surviving_indices: Vec<usize>,
    pub removed_count: usize,
    pub trace: Vec<IterationRecord>,
}

impl RefineResult {
    pub fn removed_indices(&self, total: usize) -> Vec<usize> {
        let mut keep = vec![false; total];
        for &i in &self.surviving_indices {
            keep[i] = true;
        }
        (0..total).filter(|&i| !keep[i]).collect()
    }
}

/// Annealed refinement: `t_max` rounds of solve, prune at `eps`, cool.
pub fn sa_lmpe(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    start: &Pose,
    schedule: &AnnealSchedule,
) -> Result<RefineResult> {
    schedule.validate()?;
    if correspondences.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData {
            needed: MIN_CORRESPONDENCES,
            got: correspondences.len(),
        });
    }

    let mut active: Vec<usize> = (0..correspondences.len()).collect();
    let mut pose = *start;
    let mut trace = Vec::with_capacity(schedule.t_max);

    for (iteration, (delta, eps)) in schedule.steps().into_iter().enumerate() {
        let subset: Vec<Correspondence> = active.iter().map(|&i| correspondences[i]).collect();
        let outcome = lmpe(&subset, landmarks, camera, &pose, HuberParam::new(delta)?)?;
        pose = outcome.pose;

        let r = residuals(&pose, &subset, landmarks, camera)?;
        let kept: Vec<usize> = (0..subset.len()).filter(|&k| r[k] <= eps).collect();
        let pruning_skipped = kept.len() < MIN_CORRESPONDENCES;
        let before = active.len();
        let kept = if pruning_skipped {
            (0..subset.len()).collect()
        } else {
            kept
        };
        let sum_sq: f64 = kept.iter().map(|&k| r[k] * r[k]).sum();
        active = kept.iter().map(|&k| active[k]).collect();

        trace.push(IterationRecord {
            iteration,
            delta,
            eps,
            pose,
            objective: outcome.final_objective,
            active: before,
            removed: before - active.len(),
            pruning_skipped,
            converged: outcome.converged,
            rms_px: (sum_sq / active.len() as f64).sqrt(),
        });
    }

    Ok(RefineResult {
        pose,
        surviving: active.iter().map(|&i| correspondences[i]).collect(),
        removed_count: correspondences.len() - active.len(),
        surviving_indices: active,
        trace,
    })
}
