//! Synthetic scenes and the end-to-end benchmark.
//!
//! A scene is a random pose of the landmark model in front of the camera,
//! with Gaussian pixel noise on every visible projection and a few
//! correspondences swapped for uniform in-frame outliers. The benchmark runs
//! [`estimate`](crate::pipeline::estimate) on each scene and scores the
//! RANSAC initialization and every annealing iterate against the truth.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{ordered_map, Execution};
use crate::geometry::{project_landmarks, Camera, Correspondence, LandmarkSet, Pose, Quaternion, Vec2, Vec3};
use crate::io::{fmt_csv, write_atomic, write_json_atomic, IoError, SCHEMA_VERSION};
use crate::metrics::{bbox_from_landmarks, iou, PoseScore};
use crate::pipeline::estimate;
use crate::pnp::RansacConfig;
use crate::refine::{residuals, AnnealSchedule, MIN_CORRESPONDENCES};

pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

/// Outliers land at least this far from the true projection, and at least
/// ten noise standard deviations.
pub const MIN_OUTLIER_DISPLACEMENT_PX: f64 = 10.0;

pub const BBOX_RELAX: f64 = 0.1;

pub const HISTOGRAM_BIN_WIDTH_PX: f64 = 0.5;
pub const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_scenes: usize,
    /// Depth of the landmark centroid, metres.
    pub depth_range: [f64; 2],
    /// Standard deviation of the per-axis pixel noise.
    pub noise_sigma: f64,
    /// Inclusive range of outliers drawn per scene.
    pub outlier_count_range: [usize; 2],
    /// Scenes with fewer visible landmarks are redrawn.
    pub min_visible: usize,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_scenes: 1000,
            depth_range: [3.0, 30.0],
            noise_sigma: 2.0,
            outlier_count_range: [0, 3],
            min_visible: 8,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.depth_range;
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!(
                "depth_range must be positive with min <= max, got [{lo}, {hi}]"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        let [omin, omax] = self.outlier_count_range;
        if omin > omax {
            return Err(Error::InvalidConfig(format!(
                "outlier_count_range must have min <= max, got [{omin}, {omax}]"
            )));
        }
        if self.min_visible < MIN_CORRESPONDENCES {
            return Err(Error::InvalidConfig(format!(
                "min_visible must be at least {MIN_CORRESPONDENCES}, got {}",
                self.min_visible
            )));
        }
        Ok(())
    }

    fn validate_for(&self, landmarks: &LandmarkSet) -> Result<()> {
        self.validate()?;
        if self.min_visible > landmarks.len() {
            return Err(Error::InvalidConfig(format!(
                "min_visible {} exceeds the {} landmarks in the model",
                self.min_visible,
                landmarks.len()
            )));
        }
        Ok(())
    }
}

/// Eleven non-coplanar points roughly the size of a small satellite: the
/// bus corners, the tips of a solar panel and three antenna ends.
pub fn default_landmarks() -> LandmarkSet {
    LandmarkSet::new(vec![
        Vec3::new(-0.37, -0.39, -0.16),
        Vec3::new(0.37, -0.39, -0.16),
        Vec3::new(0.37, 0.39, -0.16),
        Vec3::new(-0.37, 0.39, -0.16),
        Vec3::new(-0.37, -0.26, 0.30),
        Vec3::new(0.37, -0.26, 0.30),
        Vec3::new(0.37, 0.26, 0.30),
        Vec3::new(-0.37, 0.26, 0.30),
        Vec3::new(-0.54, 0.49, 0.26),
        Vec3::new(0.31, -0.58, 0.56),
        Vec3::new(0.0, 0.02, -0.72),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub truth_pose: Pose,
    /// One per landmark, in landmark order. Landmarks outside the frame are
    /// kept with `visible: false` and their exact projection.
    pub correspondences: Vec<Correspondence>,
    pub outlier_labels: Vec<bool>,
}

/// A replayable set of scenes together with the model they were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSet {
    pub version: u32,
    pub config: SceneConfig,
    pub camera: Camera,
    pub landmarks: LandmarkSet,
    pub scenes: Vec<SyntheticScene>,
}

/// RNG for one scene: the configured seed, on a stream chosen by the index.
pub fn scene_rng(seed: u64, scene_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene_index as u64);
    rng
}

fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return q.normalized();
        }
    }
}

fn uniform_in_frame<R: Rng + ?Sized>(rng: &mut R, camera: &Camera) -> Vec2 {
    Vec2::new(
        rng.random_range(0.0..camera.width as f64),
        rng.random_range(0.0..camera.height as f64),
    )
}

fn gaussian2<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec2 {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    Vec2::new(sigma * dx, sigma * dy)
}

/// Draws one scene. Fails with a config error when no acceptable pose is
/// found within [`MAX_SAMPLING_ATTEMPTS`].
pub fn sample_scene<R: Rng + ?Sized>(
    config: &SceneConfig,
    landmarks: &LandmarkSet,
    camera: &Camera,
    rng: &mut R,
) -> Result<SyntheticScene> {
    config.validate_for(landmarks)?;
    camera.validate()?;
    let centroid =
        landmarks.points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / landmarks.len() as f64;
    let [dmin, dmax] = config.depth_range;

    let mut accepted = None;
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let rotation = uniform_rotation(rng);
        let depth = if dmin < dmax {
            rng.random_range(dmin..=dmax)
        } else {
            dmin
        };
        let ray = camera.unproject(&uniform_in_frame(rng, camera));
        let translation = ray * (depth / ray.z) - rotation.rotate(&centroid);
        let pose = Pose::new(rotation, translation);
        let in_front = landmarks
            .points
            .iter()
            .all(|x| pose.transform_point(x).z > 0.0);
        if !in_front {
            continue;
        }
        let projected = project_landmarks(&pose, landmarks, camera);
        if projected.iter().filter(|(_, v)| *v).count() >= config.min_visible {
            accepted = Some((pose, projected));
            break;
        }
    }
    let Some((truth_pose, projected)) = accepted else {
        return Err(Error::InvalidConfig(format!(
            "no scene with {} visible landmarks after {MAX_SAMPLING_ATTEMPTS} attempts",
            config.min_visible
        )));
    };

    let mut correspondences: Vec<Correspondence> = projected
        .iter()
        .enumerate()
        .map(|(i, (uv, visible))| {
            let image_point = if *visible {
                uv + gaussian2(rng, config.noise_sigma)
            } else {
                *uv
            };
            Correspondence {
                landmark_index: i,
                image_point,
                visible: *visible,
            }
        })
        .collect();

    let visible: Vec<usize> = (0..projected.len()).filter(|&i| projected[i].1).collect();
    let [omin, omax] = config.outlier_count_range;
    let count = rng.random_range(omin..=omax).min(visible.len());
    let min_shift = (10.0 * config.noise_sigma).max(MIN_OUTLIER_DISPLACEMENT_PX);
    let mut outlier_labels = vec![false; correspondences.len()];
    for k in index::sample(rng, visible.len(), count).into_vec() {
        let i = visible[k];
        let truth = projected[i].0;
        let mut attempts = 0;
        let uv = loop {
            let uv = uniform_in_frame(rng, camera);
            if (uv - truth).norm() >= min_shift {
                break uv;
            }
            attempts += 1;
            if attempts >= MAX_SAMPLING_ATTEMPTS {
                return Err(Error::InvalidConfig(format!(
                    "cannot place an outlier {min_shift} px from its landmark inside the frame"
                )));
            }
        };
        correspondences[i].image_point = uv;
        outlier_labels[i] = true;
    }

    Ok(SyntheticScene {
        truth_pose,
        correspondences,
        outlier_labels,
    })
}

pub fn generate_scenes(
    config: &SceneConfig,
    landmarks: &LandmarkSet,
    camera: &Camera,
    exec: Execution,
) -> Result<Vec<SyntheticScene>> {
    config.validate_for(landmarks)?;
    let ids: Vec<usize> = (0..config.n_scenes).collect();
    ordered_map(exec, &ids, |_, &i| {
        sample_scene(config, landmarks, camera, &mut scene_rng(config.rng_seed, i))
    })
    .into_iter()
    .collect()
}

/// Residual counts on fixed edges `0, w, 2w, ...` with a final overflow bin
/// for everything at or beyond the last edge (including infinite residuals
/// of points behind the camera).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self {
            edges: (0..=HISTOGRAM_BINS)
                .map(|i| i as f64 * HISTOGRAM_BIN_WIDTH_PX)
                .collect(),
            counts: vec![0; HISTOGRAM_BINS],
            overflow: 0,
        }
    }

    pub fn add(&mut self, r: f64) {
        let bin = (r / HISTOGRAM_BIN_WIDTH_PX).floor();
        if bin >= 0.0 && bin < HISTOGRAM_BINS as f64 {
            self.counts[bin as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{c}", fmt_csv(self.edges[i]), fmt_csv(self.edges[i + 1]));
        }
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_csv(self.edges[HISTOGRAM_BINS]),
            fmt_csv(f64::INFINITY),
            self.overflow
        );
        out
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene_id: usize,
    /// Error message when the scene could not be estimated.
    pub failure: Option<String>,
    pub n_visible: usize,
    pub n_outliers: usize,
    pub before: Option<PoseScore>,
    pub after: Option<PoseScore>,
    pub iou_before: Option<f64>,
    pub iou: Option<f64>,
    pub ransac_inliers: usize,
    pub ransac_iterations: usize,
    /// Input positions of the pruned correspondences.
    pub removed: Vec<usize>,
    pub true_removals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub s_r: f64,
    pub s_t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub version: u32,
    pub config: SceneConfig,
    pub ransac: RansacConfig,
    pub schedule: AnnealSchedule,
    pub n_scenes: usize,
    pub n_failed: usize,
    pub failure_rate: f64,
    pub mean_before: Option<PoseScore>,
    pub mean_after: Option<PoseScore>,
    pub mean_iou: Option<f64>,
    /// Mean scores of the initialization (iteration 0) and of each annealing
    /// iterate, over the successful scenes. Empty when none succeeded.
    pub score_trace: Vec<TracePoint>,
    /// Every visible correspondence under the initial pose.
    pub histogram_before: Histogram,
    /// Surviving correspondences under the refined pose.
    pub histogram_after: Histogram,
    pub median_residual_before: Option<f64>,
    /// Surviving correspondences under the initial pose.
    pub median_residual_before_surviving: Option<f64>,
    pub median_residual_after: Option<f64>,
    pub total_visible: usize,
    pub total_outliers: usize,
    pub total_removed: usize,
    pub true_removals: usize,
    /// `None` when nothing was removed.
    pub removal_precision: Option<f64>,
    /// `None` when no outliers were generated.
    pub removal_recall: Option<f64>,
    pub scenes: Vec<SceneResult>,
}

struct SceneRun {
    result: SceneResult,
    trace: Vec<PoseScore>,
    before_all: Vec<f64>,
    before_surviving: Vec<f64>,
    after: Vec<f64>,
}

fn scene_iou(truth: &Pose, est: &Pose, scene: &SyntheticScene, lm: &LandmarkSet, cam: &Camera) -> f64 {
    let boxed = |pose: &Pose| -> Result<_> {
        let pts: Vec<Vec2> = scene
            .correspondences
            .iter()
            .filter(|c| c.visible)
            .map(|c| crate::geometry::project(pose, lm.get(c.landmark_index)?, cam))
            .collect::<Result<_>>()?;
        bbox_from_landmarks(&pts, BBOX_RELAX, cam)
    };
    match (boxed(truth), boxed(est)) {
        (Ok(a), Ok(b)) => iou(&a, &b),
        _ => 0.0,
    }
}

fn run_scene(
    scene_id: usize,
    scene: &SyntheticScene,
    landmarks: &LandmarkSet,
    camera: &Camera,
    ransac: &RansacConfig,
    schedule: &AnnealSchedule,
) -> SceneRun {
    let n_visible = scene.correspondences.iter().filter(|c| c.visible).count();
    let n_outliers = scene
        .correspondences
        .iter()
        .zip(&scene.outlier_labels)
        .filter(|(c, o)| c.visible && **o)
        .count();
    let mut result = SceneResult {
        scene_id,
        failure: None,
        n_visible,
        n_outliers,
        before: None,
        after: None,
        iou_before: None,
        iou: None,
        ransac_inliers: 0,
        ransac_iterations: 0,
        removed: Vec::new(),
        true_removals: 0,
        converged: false,
    };
    let failed = |mut result: SceneResult, e: Error| {
        result.failure = Some(e.to_string());
        SceneRun {
            result,
            trace: Vec::new(),
            before_all: Vec::new(),
            before_surviving: Vec::new(),
            after: Vec::new(),
        }
    };

    let config = RansacConfig {
        rng_seed: ransac.rng_seed.wrapping_add(scene_id as u64),
        ..*ransac
    };
    let est = match estimate(&scene.correspondences, landmarks, camera, &config, schedule) {
        Ok(e) => e,
        Err(e) => return failed(result, e),
    };
    let truth = &scene.truth_pose;
    let scored = (|| -> Result<_> {
        let mut trace = vec![PoseScore::new(truth, &est.initial_pose())?];
        for rec in &est.refined.trace {
            trace.push(PoseScore::new(truth, &rec.pose)?);
        }
        let visible: Vec<Correspondence> =
            est.visible_indices.iter().map(|&i| scene.correspondences[i]).collect();
        let before_all = residuals(&est.initial_pose(), &visible, landmarks, camera)?;
        let before_surviving =
            residuals(&est.initial_pose(), &est.refined.surviving, landmarks, camera)?;
        let after = residuals(&est.pose(), &est.refined.surviving, landmarks, camera)?;
        Ok((trace, before_all, before_surviving, after))
    })();
    let (trace, before_all, before_surviving, after) = match scored {
        Ok(v) => v,
        Err(e) => return failed(result, e),
    };

    let removed = est.removed();
    result.true_removals = removed.iter().filter(|&&i| scene.outlier_labels[i]).count();
    result.removed = removed;
    result.before = trace.first().copied();
    result.after = trace.last().copied();
    result.iou_before = Some(scene_iou(truth, &est.initial_pose(), scene, landmarks, camera));
    result.iou = Some(scene_iou(truth, &est.pose(), scene, landmarks, camera));
    result.ransac_inliers = est.ransac.inlier_count();
    result.ransac_iterations = est.ransac.iterations_run;
    result.converged = est.refined.trace.last().is_some_and(|r| r.converged);
    SceneRun {
        result,
        trace,
        before_all,
        before_surviving,
        after,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean_score<'a>(scores: impl Iterator<Item = &'a PoseScore>) -> Option<PoseScore> {
    let mut n = 0usize;
    let mut acc = [0.0; 4];
    for s in scores {
        n += 1;
        acc[0] += s.e_r_deg;
        acc[1] += s.e_t_m;
        acc[2] += s.s_r;
        acc[3] += s.s_t;
    }
    (n > 0).then(|| {
        let k = n as f64;
        let (s_r, s_t) = (acc[2] / k, acc[3] / k);
        PoseScore {
            e_r_deg: acc[0] / k,
            e_t_m: acc[1] / k,
            s_r,
            s_t,
            s: s_r + s_t,
        }
    })
}

/// Estimates and scores a fixed set of scenes. Scene-level failures are
/// recorded in the report; only invalid configurations are errors.
pub fn evaluate_scenes(
    config: &SceneConfig,
    scenes: &[SyntheticScene],
    landmarks: &LandmarkSet,
    camera: &Camera,
    ransac: &RansacConfig,
    schedule: &AnnealSchedule,
    exec: Execution,
) -> Result<BenchmarkReport> {
    ransac.validate()?;
    schedule.validate()?;
    camera.validate()?;
    for scene in scenes {
        if scene.outlier_labels.len() != scene.correspondences.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outlier labels for {} correspondences",
                scene.outlier_labels.len(),
                scene.correspondences.len()
            )));
        }
    }
    let runs = ordered_map(exec, scenes, |i, scene| {
        run_scene(i, scene, landmarks, camera, ransac, schedule)
    });

    let ok: Vec<&SceneRun> = runs.iter().filter(|r| r.result.failure.is_none()).collect();
    let n_failed = runs.len() - ok.len();
    let mut score_trace = Vec::new();
    if !ok.is_empty() {
        for t in 0..=schedule.t_max {
            let m = mean_score(ok.iter().map(|r| &r.trace[t])).expect("non-empty");
            score_trace.push(TracePoint {
                iteration: t,
                s_r: m.s_r,
                s_t: m.s_t,
                s: m.s,
            });
        }
    }

    let mut histogram_before = Histogram::new();
    let mut histogram_after = Histogram::new();
    for r in &ok {
        r.before_all.iter().for_each(|&v| histogram_before.add(v));
        r.after.iter().for_each(|&v| histogram_after.add(v));
    }

    let total_visible = runs.iter().map(|r| r.result.n_visible).sum();
    let total_outliers: usize = runs.iter().map(|r| r.result.n_outliers).sum();
    let total_removed: usize = runs.iter().map(|r| r.result.removed.len()).sum();
    let true_removals: usize = runs.iter().map(|r| r.result.true_removals).sum();
    let ious: Vec<f64> = ok.iter().filter_map(|r| r.result.iou).collect();

    Ok(BenchmarkReport {
        version: SCHEMA_VERSION,
        config: *config,
        ransac: *ransac,
        schedule: *schedule,
        n_scenes: runs.len(),
        n_failed,
        failure_rate: if runs.is_empty() {
            0.0
        } else {
            n_failed as f64 / runs.len() as f64
        },
        mean_before: mean_score(ok.iter().filter_map(|r| r.result.before.as_ref())),
        mean_after: mean_score(ok.iter().filter_map(|r| r.result.after.as_ref())),
        mean_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
        score_trace,
        histogram_before,
        histogram_after,
        median_residual_before: median(ok.iter().flat_map(|r| r.before_all.iter().copied()).collect()),
        median_residual_before_surviving: median(
            ok.iter().flat_map(|r| r.before_surviving.iter().copied()).collect(),
        ),
        median_residual_after: median(ok.iter().flat_map(|r| r.after.iter().copied()).collect()),
        total_visible,
        total_outliers,
        total_removed,
        true_removals,
        removal_precision: (total_removed > 0).then(|| true_removals as f64 / total_removed as f64),
        removal_recall: (total_outliers > 0).then(|| true_removals as f64 / total_outliers as f64),
        scenes: runs.into_iter().map(|r| r.result).collect(),
    })
}

/// Generates `config.n_scenes` scenes and evaluates them.
pub fn run_benchmark(
    config: &SceneConfig,
    landmarks: &LandmarkSet,
    camera: &Camera,
    ransac: &RansacConfig,
    schedule: &AnnealSchedule,
    exec: Execution,
) -> Result<BenchmarkReport> {
    ransac.validate()?;
    schedule.validate()?;
    let scenes = generate_scenes(config, landmarks, camera, exec)?;
    evaluate_scenes(config, &scenes, landmarks, camera, ransac, schedule, exec)
}

impl BenchmarkReport {
    pub fn scenes_csv(&self) -> String {
        let mut out = String::from("scene_id,e_r_deg,e_t_m,s_r,s_t,s,iou,n_removed,converged\n");
        for r in &self.scenes {
            let s = r.after;
            let f = |v: Option<f64>| fmt_csv(v.unwrap_or(f64::NAN));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scene_id,
                f(s.map(|s| s.e_r_deg)),
                f(s.map(|s| s.e_t_m)),
                f(s.map(|s| s.s_r)),
                f(s.map(|s| s.s_t)),
                f(s.map(|s| s.s)),
                f(r.iou),
                r.removed.len(),
                r.converged
            );
        }
        out
    }

    pub fn score_evolution_csv(&self) -> String {
        let mut out = String::from("iteration,s_r,s_t,s\n");
        for p in &self.score_trace {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.iteration,
                fmt_csv(p.s_r),
                fmt_csv(p.s_t),
                fmt_csv(p.s)
            );
        }
        out
    }

    /// Writes `report.json`, `scenes.csv`, `score_evolution.csv`,
    /// `histogram_before.csv` and `histogram_after.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::result::Result<(), IoError> {
        fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_owned(),
            source,
        })?;
        write_json_atomic(&dir.join("report.json"), self)?;
        write_atomic(&dir.join("scenes.csv"), self.scenes_csv().as_bytes())?;
        write_atomic(
            &dir.join("score_evolution.csv"),
            self.score_evolution_csv().as_bytes(),
        )?;
        write_atomic(
            &dir.join("histogram_before.csv"),
            self.histogram_before.to_csv().as_bytes(),
        )?;
        write_atomic(
            &dir.join("histogram_after.csv"),
            self.histogram_after.to_csv().as_bytes(),
        )
    }
}
