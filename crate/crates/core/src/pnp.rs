//! Pose initialization: a three-point minimal solver inside RANSAC.
//!
//! The P3P solver works on the law-of-cosines system for the three depths.
//! Writing the second and third depth as multiples `x`, `y` of the first,
//! two conics in `(x, y)` remain; their resultant is a quartic in `y`.
//! Every real root yields `x` by linear elimination, the depths follow, and
//! the rigid transform is recovered by aligning the camera-frame triangle to
//! the object-frame triangle. Depths and pose are polished with a few Newton
//! steps so candidates reproject their three points to machine precision.

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Correspondence, LandmarkSet, Pose, Quaternion, Vec2, Vec3};
use crate::refine::residuals;

const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Solves the perspective-three-point problem for exactly three
/// correspondences. Returns every real, cheiral solution.
pub fn p3p(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
) -> Result<Vec<Pose>> {
    if correspondences.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "p3p takes exactly 3 correspondences, got {}",
            correspondences.len()
        )));
    }
    let mut world = [Vec3::zeros(); 3];
    let mut pixels = [Vec2::zeros(); 3];
    for (k, c) in correspondences.iter().enumerate() {
        world[k] = *landmarks.get(c.landmark_index)?;
        pixels[k] = c.image_point;
    }
    if is_collinear(&world) {
        return Err(Error::Degenerate("landmark triple is collinear".into()));
    }
    if pixels[0] == pixels[1] || pixels[0] == pixels[2] || pixels[1] == pixels[2] {
        return Err(Error::Degenerate("image points are not distinct".into()));
    }
    let bearings = pixels.map(|uv| camera.unproject(&uv).normalize());

    let poses = solve_depths(&world, &bearings)
        .into_iter()
        .filter_map(|depths| {
            let cam = [
                bearings[0] * depths[0],
                bearings[1] * depths[1],
                bearings[2] * depths[2],
            ];
            let pose = align(&world, &cam)?;
            Some(polish_pose(pose, &world, &bearings))
        })
        .filter(|pose| world.iter().all(|x| pose.transform_point(x).z > 0.0))
        .collect::<Vec<_>>();
    Ok(dedup_poses(poses))
}

fn is_collinear(world: &[Vec3; 3]) -> bool {
    let d12 = world[1] - world[0];
    let d13 = world[2] - world[0];
    let scale = d12.norm() * d13.norm();
    scale == 0.0 || d12.cross(&d13).norm() <= COLLINEAR_TOLERANCE * scale
}

/// All positive depth triples consistent with the inter-point distances.
fn solve_depths(world: &[Vec3; 3], bearings: &[Vec3; 3]) -> Vec<Vector3<f64>> {
    // squared side lengths opposite to each point, and bearing cosines
    let a = (world[1] - world[2]).norm_squared();
    let b = (world[0] - world[2]).norm_squared();
    let c = (world[0] - world[1]).norm_squared();
    let p = bearings[0].dot(&bearings[1]);
    let q = bearings[0].dot(&bearings[2]);
    let r = bearings[1].dot(&bearings[2]);

    // resultant of the two conics in x; coefficients of y^0 .. y^4
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let k0 = -(-a2 + 4.0 * a * b * p * p - 2.0 * a * b + 2.0 * a * c - b2 + 2.0 * b * c - c2);
    let k1 = 4.0
        * (-a2 * q + 2.0 * a * b * p * p * q + a * b * p * r - a * b * q + 2.0 * a * c * q
            - b2 * p * r
            + b * c * p * r
            + b * c * q
            - c2 * q);
    let k2 = -2.0
        * (-2.0 * a2 * q * q - a2 + 2.0 * a * b * p * p + 4.0 * a * b * p * q * r
            + 4.0 * a * c * q * q
            + 2.0 * a * c
            - 2.0 * b2 * p * p
            - 2.0 * b2 * r * r
            + b2
            + 4.0 * b * c * p * q * r
            + 2.0 * b * c * r * r
            - 2.0 * c2 * q * q
            - c2);
    let k3 = 4.0
        * (-a2 * q + a * b * p * r + a * b * q + 2.0 * a * c * q - b2 * p * r + b * c * p * r
            + 2.0 * b * c * q * r * r
            - b * c * q
            - c2 * q);
    let k4 = -(-a2 + 2.0 * a * b + 2.0 * a * c - b2 + 4.0 * b * c * r * r - 2.0 * b * c - c2);

    let conic1 = |x: f64, y: f64| b * (1.0 + x * x - 2.0 * x * p) - c * (1.0 + y * y - 2.0 * y * q);
    let conic2 =
        |x: f64, y: f64| a * (1.0 + x * x - 2.0 * x * p) - c * (x * x + y * y - 2.0 * x * y * r);

    let mut out = Vec::new();
    for y in real_quartic_roots([k0, k1, k2, k3, k4]) {
        if !(y > 0.0) {
            continue;
        }
        // x from the combination that cancels x^2; fall back to the quadratic
        let denom = 2.0 * b * (p - r * y);
        let mut xs = Vec::with_capacity(2);
        if denom.abs() > 1e-12 * b {
            xs.push(((a - b - c) * y * y + 2.0 * q * (c - a) * y + (a + b - c)) / denom);
        } else {
            let cc = b - c * (1.0 + y * y - 2.0 * y * q);
            let disc = 4.0 * b * b * p * p - 4.0 * b * cc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                xs.push((2.0 * b * p + s) / (2.0 * b));
                xs.push((2.0 * b * p - s) / (2.0 * b));
            }
        }
        for x in xs {
            if !(x > 0.0) {
                continue;
            }
            let scale = a.max(b).max(c);
            if conic1(x, y).abs() > 1e-6 * scale || conic2(x, y).abs() > 1e-6 * scale {
                continue;
            }
            let denom = 1.0 + x * x - 2.0 * x * p;
            if !(denom > 0.0) {
                continue;
            }
            let d1 = (c / denom).sqrt();
            let depths = refine_depths(Vector3::new(d1, x * d1, y * d1), a, b, c, p, q, r);
            if depths.iter().all(|d| *d > 0.0 && d.is_finite()) {
                out.push(depths);
            }
        }
    }
    out
}

/// Newton iterations on the three law-of-cosines equations.
fn refine_depths(mut d: Vector3<f64>, a: f64, b: f64, c: f64, p: f64, q: f64, r: f64) -> Vector3<f64> {
    let eval = |d: &Vector3<f64>| {
        Vector3::new(
            d[0] * d[0] + d[1] * d[1] - 2.0 * p * d[0] * d[1] - c,
            d[0] * d[0] + d[2] * d[2] - 2.0 * q * d[0] * d[2] - b,
            d[1] * d[1] + d[2] * d[2] - 2.0 * r * d[1] * d[2] - a,
        )
    };
    let mut f = eval(&d);
    for _ in 0..8 {
        let j = Matrix3::new(
            2.0 * d[0] - 2.0 * p * d[1],
            2.0 * d[1] - 2.0 * p * d[0],
            0.0,
            2.0 * d[0] - 2.0 * q * d[2],
            0.0,
            2.0 * d[2] - 2.0 * q * d[0],
            0.0,
            2.0 * d[1] - 2.0 * r * d[2],
            2.0 * d[2] - 2.0 * r * d[1],
        );
        let Some(step) = j.lu().solve(&f) else { break };
        let next = d - step;
        let f_next = eval(&next);
        if f_next.norm() >= f.norm() {
            break;
        }
        d = next;
        f = f_next;
    }
    d
}

/// Rigid transform taking the object triangle onto the camera triangle.
fn align(world: &[Vec3; 3], cam: &[Vec3; 3]) -> Option<Pose> {
    let cw = (world[0] + world[1] + world[2]) / 3.0;
    let cc = (cam[0] + cam[1] + cam[2]) / 3.0;
    let mut cov = Matrix3::zeros();
    for k in 0..3 {
        cov += (cam[k] - cc) * (world[k] - cw).transpose();
    }
    let svd = cov.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rot = u * fix * v_t;
    let q = Quaternion::from_rotation_matrix(&rot);
    let t = cc - q.rotate(&cw);
    Some(Pose::new(q, t))
}

/// Gauss-Newton on the six normalized-plane residuals of the minimal set.
fn polish_pose(mut pose: Pose, world: &[Vec3; 3], bearings: &[Vec3; 3]) -> Pose {
    let targets = bearings.map(|b| (b.x / b.z, b.y / b.z));
    let eval = |pose: &Pose| -> Option<(Vector6<f64>, Matrix6<f64>)> {
        let mut e = Vector6::zeros();
        let mut j = Matrix6::zeros();
        for k in 0..3 {
            let rotated = pose.rotation.rotate(&world[k]);
            let p = rotated + pose.translation;
            if !(p.z > 0.0) {
                return None;
            }
            let iz = 1.0 / p.z;
            e[2 * k] = p.x * iz - targets[k].0;
            e[2 * k + 1] = p.y * iz - targets[k].1;
            let dproj = nalgebra::Matrix2x3::new(iz, 0.0, -p.x * iz * iz, 0.0, iz, -p.y * iz * iz);
            let jr = dproj * -crate::geometry::skew(&rotated);
            j.fixed_view_mut::<2, 3>(2 * k, 0).copy_from(&jr);
            j.fixed_view_mut::<2, 3>(2 * k, 3).copy_from(&dproj);
        }
        Some((e, j))
    };
    let Some((mut e, mut j)) = eval(&pose) else {
        return pose;
    };
    for _ in 0..5 {
        let Some(step) = j.lu().solve(&(-e)) else { break };
        let next = pose.retract(&step);
        match eval(&next) {
            Some((e2, j2)) if e2.norm() < e.norm() => {
                pose = next;
                e = e2;
                j = j2;
            }
            _ => break,
        }
    }
    pose
}

fn dedup_poses(poses: Vec<Pose>) -> Vec<Pose> {
    let mut out: Vec<Pose> = Vec::with_capacity(poses.len());
    for p in poses {
        let duplicate = out.iter().any(|o| {
            let w = (o.rotation * p.rotation.conjugate()).w.abs();
            w > 1.0 - 1e-14 && (o.translation - p.translation).norm() <= 1e-9 * (1.0 + o.translation.norm())
        });
        if !duplicate {
            out.push(p);
        }
    }
    out
}

/// Real roots of `sum_k coeffs[k] y^k`, found as eigenvalues of the
/// companion matrix and polished with Newton's method.
fn real_quartic_roots(coeffs: [f64; 5]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let c = coeffs.map(|v| v / scale);
    let degree = (0..5).rev().find(|&k| c[k].abs() > 1e-14).unwrap_or(0);
    if degree == 0 {
        return Vec::new();
    }
    let lead = c[degree];
    let mut roots = Vec::new();
    if degree == 1 {
        roots.push(-c[0] / c[1]);
    } else {
        // companion matrix of the monic polynomial
        let n = degree;
        let mut m = Matrix4::<f64>::zeros();
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i] / lead;
        }
        let sub = m.view((0, 0), (n, n)).into_owned();
        for z in sub.complex_eigenvalues().iter() {
            if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) {
                roots.push(z.re);
            }
        }
    }
    let eval = |y: f64| {
        let mut v = 0.0;
        let mut d = 0.0;
        for k in (0..=degree).rev() {
            d = d * y + v;
            v = v * y + c[k];
        }
        (v, d)
    };
    for y in &mut roots {
        for _ in 0..4 {
            let (v, d) = eval(*y);
            if d == 0.0 {
                break;
            }
            let next = *y - v / d;
            if eval(next).0.abs() >= v.abs() {
                break;
            }
            *y = next;
        }
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Pixels.
    pub inlier_threshold: f64,
    pub confidence: f64,
    pub rng_seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: 5.0,
            confidence: 0.99,
            rng_seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inlier_threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacResult {
    pub pose: Pose,
    /// Aligned with the input correspondences; invisible entries are never inliers.
    pub inlier_mask: Vec<bool>,
    pub iterations_run: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|v| **v).count()
    }
}

const SAMPLE_SIZE: usize = 4;

/// Hypothesis score: more inliers wins, then lower inlier RMS.
#[derive(Debug, Clone, Copy)]
struct Score {
    inliers: usize,
    sum_sq: f64,
}

impl Score {
    fn beats(&self, other: &Score) -> bool {
        if self.inliers != other.inliers {
            return self.inliers > other.inliers;
        }
        // equal counts: compare mean squared residual
        self.sum_sq < other.sum_sq
    }
}

/// Adaptive RANSAC over minimal four-point samples.
pub fn ransac_pnp(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    config: &RansacConfig,
) -> Result<RansacResult> {
    config.validate()?;
    let visible: Vec<usize> = (0..correspondences.len())
        .filter(|&i| correspondences[i].visible)
        .collect();
    if visible.len() < SAMPLE_SIZE {
        return Err(Error::InsufficientData {
            needed: SAMPLE_SIZE,
            got: visible.len(),
        });
    }
    for c in correspondences {
        landmarks.get(c.landmark_index)?;
    }
    let pool: Vec<Correspondence> = visible.iter().map(|&i| correspondences[i]).collect();
    let n = pool.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut best: Option<(Pose, Score)> = None;
    let mut required = config.max_iterations;
    let mut iterations = 0;
    let mut draws = 0;
    let max_draws = config.max_iterations.saturating_mul(100);

    while iterations < required.min(config.max_iterations) && draws < max_draws {
        draws += 1;
        let sample = index::sample(&mut rng, n, SAMPLE_SIZE).into_vec();
        let minimal: Vec<Correspondence> = sample[..3].iter().map(|&i| pool[i]).collect();
        let candidates = match p3p(&minimal, landmarks, camera) {
            Ok(c) => c,
            // collinear triple: draw again without spending an iteration
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        };
        iterations += 1;

        let check = pool[sample[3]];
        let chosen = candidates
            .into_iter()
            .map(|pose| {
                let r = residuals(&pose, &[check], landmarks, camera).map(|r| r[0]);
                (pose, r.unwrap_or(f64::INFINITY))
            })
            .filter(|(_, r)| r.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((pose, _)) = chosen else { continue };

        let score = score_pose(&pose, &pool, landmarks, camera, config.inlier_threshold)?;
        if best.as_ref().is_none_or(|(_, s)| score.beats(s)) {
            best = Some((pose, score));
            let ratio = score.inliers as f64 / n as f64;
            required = adaptive_iterations(ratio, config.confidence, config.max_iterations);
        }
    }

    let (pose, score) = best.ok_or(Error::NoConsensus {
        needed: SAMPLE_SIZE,
    })?;
    if score.inliers < SAMPLE_SIZE {
        return Err(Error::NoConsensus {
            needed: SAMPLE_SIZE,
        });
    }
    let r = residuals(&pose, correspondences, landmarks, camera)?;
    let inlier_mask = correspondences
        .iter()
        .zip(&r)
        .map(|(c, r)| c.visible && *r <= config.inlier_threshold)
        .collect();
    Ok(RansacResult {
        pose,
        inlier_mask,
        iterations_run: iterations,
    })
}

fn score_pose(
    pose: &Pose,
    pool: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    threshold: f64,
) -> Result<Score> {
    let r = residuals(pose, pool, landmarks, camera)?;
    let mut score = Score {
        inliers: 0,
        sum_sq: 0.0,
    };
    for v in r.into_iter().filter(|v| *v <= threshold) {
        score.inliers += 1;
        score.sum_sq += v * v;
    }
    Ok(score)
}

/// Iterations needed to draw one all-inlier sample with the given confidence.
pub fn adaptive_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let all_inliers = inlier_ratio.powi(SAMPLE_SIZE as i32);
    if all_inliers >= 1.0 {
        return 1;
    }
    if all_inliers <= 0.0 {
        return cap;
    }
    let k = (1.0 - confidence).ln() / (1.0 - all_inliers).ln();
    if !k.is_finite() {
        return cap;
    }
    (k.ceil().max(1.0) as usize).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;
    use crate::metrics::rotation_error;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn landmarks() -> LandmarkSet {
        LandmarkSet::new(vec![
            Vec3::new(-0.4, -0.4, -0.3),
            Vec3::new(0.4, -0.4, -0.3),
            Vec3::new(0.4, 0.4, -0.3),
            Vec3::new(-0.4, 0.4, -0.3),
            Vec3::new(-0.4, -0.4, 0.3),
            Vec3::new(0.4, -0.4, 0.3),
            Vec3::new(0.4, 0.4, 0.3),
            Vec3::new(-0.4, 0.4, 0.3),
            Vec3::new(0.0, 0.0, 0.9),
            Vec3::new(1.2, 0.1, 0.0),
            Vec3::new(-1.2, -0.1, 0.0),
        ])
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let q = Quaternion::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        let z = rng.random_range(3.0..30.0);
        Pose::new(q, Vec3::new(rng.random_range(-0.3..0.3) * z, rng.random_range(-0.2..0.2) * z, z))
    }

    fn correspondences(pose: &Pose, lm: &LandmarkSet, camera: &Camera) -> Vec<Correspondence> {
        lm.points
            .iter()
            .enumerate()
            .map(|(i, x)| Correspondence::new(i, project(pose, x, camera).unwrap()))
            .collect()
    }

    fn pose_close(a: &Pose, b: &Pose, tol: f64) -> bool {
        rotation_error(&a.rotation, &b.rotation).unwrap() < tol
            && (a.translation - b.translation).norm() < tol * (1.0 + b.translation.norm())
    }

    #[test]
    fn quartic_roots_of_known_polynomial() {
        // (y-1)(y-2)(y+3)(y-0.5)
        let roots = real_quartic_roots([-3.0, 9.5, -7.0, -0.5, 1.0]);
        let mut sorted = roots.clone();
        sorted.sort_by(f64::total_cmp);
        let expected = [-3.0, 0.5, 1.0, 2.0];
        assert_eq!(sorted.len(), 4);
        for (r, e) in sorted.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
        assert_eq!(real_quartic_roots([1.0, 0.0, 1.0, 0.0, 0.0]).len(), 0);
    }

    #[test]
    fn p3p_contains_true_pose() {
        let camera = Camera::default();
        let lm = landmarks();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let truth = random_pose(&mut rng);
            let corr = correspondences(&truth, &lm, &camera);
            let pick = index::sample(&mut rng, lm.len(), 3).into_vec();
            let minimal: Vec<_> = pick.iter().map(|&i| corr[i]).collect();
            let poses = p3p(&minimal, &lm, &camera).unwrap();
            assert!(!poses.is_empty() && poses.len() <= 4);
            assert!(
                poses.iter().any(|p| pose_close(p, &truth, 1e-6)),
                "truth not among {} candidates",
                poses.len()
            );
            for p in &poses {
                for c in &minimal {
                    assert!(crate::refine::residual(p, c, &lm, &camera).unwrap() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn p3p_collinear_is_degenerate() {
        let camera = Camera::default();
        let lm = LandmarkSet::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(2.0, 2.0, 0.0),
        ]);
        let pose = Pose::new(Quaternion::identity(), Vec3::new(0.0, 0.0, 5.0));
        let corr = correspondences(&pose, &lm, &camera);
        assert!(matches!(p3p(&corr, &lm, &camera), Err(Error::Degenerate(_))));
    }

    #[test]
    fn p3p_symmetric_configuration_has_multiple_solutions() {
        let camera = Camera::default();
        let s = 3f64.sqrt() / 2.0;
        // equilateral triangle centred on the optical axis, facing the camera
        let lm = LandmarkSet::new(vec![
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(s, -0.5, 0.0),
            Vec3::new(-s, -0.5, 0.0),
        ]);
        let pose = Pose::new(Quaternion::identity(), Vec3::new(0.0, 0.0, 2.0));
        let corr = correspondences(&pose, &lm, &camera);
        let poses = p3p(&corr, &lm, &camera).unwrap();
        assert!(poses.len() >= 2, "got {} candidates", poses.len());
        assert!(poses.iter().any(|p| pose_close(p, &pose, 1e-6)));
        for p in &poses {
            for c in &corr {
                assert!(crate::refine::residual(p, c, &lm, &camera).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn p3p_needs_exactly_three() {
        let camera = Camera::default();
        let lm = landmarks();
        let corr = correspondences(&Pose::new(Quaternion::identity(), Vec3::new(0.0, 0.0, 5.0)), &lm, &camera);
        assert!(matches!(p3p(&corr[..4], &lm, &camera), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ransac_noiseless() {
        let camera = Camera::default();
        let lm = landmarks();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = random_pose(&mut rng);
        let corr = correspondences(&truth, &lm, &camera);
        let out = ransac_pnp(&corr, &lm, &camera, &RansacConfig::default()).unwrap();
        assert!(pose_close(&out.pose, &truth, 1e-6));
        assert_eq!(out.inlier_count(), 11);
        assert!(out.iterations_run <= 2);
    }

    #[test]
    fn ransac_excludes_gross_outliers() {
        let camera = Camera::default();
        let lm = landmarks();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let truth = random_pose(&mut rng);
        let mut corr = correspondences(&truth, &lm, &camera);
        for c in &mut corr {
            c.image_point += Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        let outliers = [1usize, 5, 9];
        for &i in &outliers {
            loop {
                let z = Vec2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1200.0));
                if (z - corr[i].image_point).norm() > 50.0 {
                    corr[i].image_point = z;
                    break;
                }
            }
        }
        let config = RansacConfig {
            rng_seed: 3,
            ..RansacConfig::default()
        };
        let out = ransac_pnp(&corr, &lm, &camera, &config).unwrap();
        for (i, inlier) in out.inlier_mask.iter().enumerate() {
            assert_eq!(*inlier, !outliers.contains(&i), "index {i}");
        }
    }

    #[test]
    fn ransac_is_deterministic_and_self_consistent() {
        let camera = Camera::default();
        let lm = landmarks();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = random_pose(&mut rng);
        let mut corr = correspondences(&truth, &lm, &camera);
        corr[0].image_point += Vec2::new(40.0, 40.0);
        corr[4].image_point += Vec2::new(3.0, -2.0);
        let config = RansacConfig {
            rng_seed: 99,
            ..RansacConfig::default()
        };
        let a = ransac_pnp(&corr, &lm, &camera, &config).unwrap();
        let b = ransac_pnp(&corr, &lm, &camera, &config).unwrap();
        assert_eq!(a, b);
        let r = residuals(&a.pose, &corr, &lm, &camera).unwrap();
        let recomputed: Vec<bool> = r.iter().map(|v| *v <= config.inlier_threshold).collect();
        assert_eq!(recomputed, a.inlier_mask);
    }

    #[test]
    fn ransac_ignores_invisible_correspondences() {
        let camera = Camera::default();
        let lm = landmarks();
        let truth = Pose::new(Quaternion::identity(), Vec3::new(0.0, 0.0, 6.0));
        let mut corr = correspondences(&truth, &lm, &camera);
        corr[2].visible = false;
        corr[2].image_point = Vec2::new(5000.0, 5000.0);
        let out = ransac_pnp(&corr, &lm, &camera, &RansacConfig::default()).unwrap();
        assert!(!out.inlier_mask[2]);
        assert_eq!(out.inlier_count(), 10);
    }

    #[test]
    fn ransac_insufficient_data() {
        let camera = Camera::default();
        let lm = landmarks();
        let corr = correspondences(&Pose::new(Quaternion::identity(), Vec3::new(0.0, 0.0, 5.0)), &lm, &camera);
        assert_eq!(
            ransac_pnp(&corr[..3], &lm, &camera, &RansacConfig::default()).unwrap_err(),
            Error::InsufficientData { needed: 4, got: 3 }
        );
    }

    #[test]
    fn ransac_no_consensus_on_noise() {
        let camera = Camera::default();
        let lm = landmarks();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let corr: Vec<Correspondence> = (0..11)
            .map(|i| {
                Correspondence::new(
                    i,
                    Vec2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1200.0)),
                )
            })
            .collect();
        let config = RansacConfig {
            inlier_threshold: 0.01,
            max_iterations: 200,
            ..RansacConfig::default()
        };
        assert!(matches!(
            ransac_pnp(&corr, &lm, &camera, &config),
            Err(Error::NoConsensus { .. })
        ));
    }

    #[test]
    fn adaptive_bound() {
        assert_eq!(adaptive_iterations(1.0, 0.99, 1000), 1);
        assert_eq!(adaptive_iterations(0.0, 0.99, 1000), 1000);
        // 0.5^4 = 1/16: ln(0.01)/ln(15/16) = 71.36
        assert_eq!(adaptive_iterations(0.5, 0.99, 1000), 72);
    }
}
