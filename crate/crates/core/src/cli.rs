//! The `satpose` command line.
//!
//! Exit codes: 0 success, 1 input/output problem (unreadable or malformed
//! files, a pose missing for a referenced image), 2 degenerate or
//! underdetermined geometry, 3 no RANSAC consensus, 64 usage or invalid
//! configuration.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{default_landmarks, generate_scenes, run_benchmark, SceneConfig, SceneSet};
use crate::error::Error;
use crate::exec::Execution;
use crate::geometry::{Camera, Correspondence, LandmarkSet, Pose};
use crate::io::{read_json, write_json_atomic, ImagePose, IoError, ProjectFile, SCHEMA_VERSION};
use crate::metrics::PoseScore;
use crate::pipeline::estimate;
use crate::pnp::RansacConfig;
use crate::refine::{AnnealSchedule, IterationRecord};
use crate::triangulation::{triangulate_with, Observation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_GEOMETRY: i32 = 2;
pub const EXIT_NO_CONSENSUS: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "satpose", version, about = "Robust monocular 6DOF pose estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct landmark positions from observations in posed images.
    Triangulate(TriangulateArgs),
    /// Estimate a pose from 2D-3D correspondences (RANSAC, then annealed refinement).
    Estimate(EstimateArgs),
    /// Run the synthetic benchmark and write a report directory.
    Benchmark(BenchmarkArgs),
    /// Generate a replayable set of synthetic scenes.
    Synth(SynthArgs),
}

/// Either a project file or the individual inputs.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Project file bundling camera, landmarks and the command's data.
    #[arg(long, conflicts_with_all = ["camera", "landmarks"])]
    pub project: Option<PathBuf>,
    /// Camera intrinsics JSON.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Landmark model JSON.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TriangulateArgs {
    /// Observations JSON (list of {landmark, image, uv}).
    #[arg(long, conflicts_with = "project")]
    pub observations: Option<PathBuf>,
    /// Image poses JSON (list of {image, q, t}).
    #[arg(long, conflicts_with = "project")]
    pub poses: Option<PathBuf>,
    /// Camera intrinsics JSON.
    #[arg(long, conflicts_with = "project")]
    pub camera: Option<PathBuf>,
    /// Project file with camera, poses and observations.
    #[arg(long)]
    pub project: Option<PathBuf>,
    /// Output landmarks JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Correspondences JSON (list of {landmark, uv, visible}).
    #[arg(long, conflicts_with = "project")]
    pub correspondences: Option<PathBuf>,
    /// Directory receiving pose.json and report.json.
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub ransac: RansacArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Scene configuration JSON; every field is optional.
    pub config: Option<PathBuf>,
    /// Camera intrinsics JSON (default: 1920x1200, f = 1000 px).
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Landmark model JSON (default: built-in 11-point model).
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    /// Override the number of scenes.
    #[arg(long)]
    pub n_scenes: Option<usize>,
    /// Override the scene seed.
    #[arg(long)]
    pub scene_seed: Option<u64>,
    /// Report directory.
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub ransac: RansacArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene configuration JSON; every field is optional.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub n_scenes: Option<usize>,
    #[arg(long)]
    pub scene_seed: Option<u64>,
    /// Scene set JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write one project file per scene (scene_00000.json, ...) here.
    #[arg(long)]
    pub projects: Option<PathBuf>,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Run on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl ExecArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Args)]
pub struct RansacArgs {
    /// Inlier threshold, pixels.
    #[arg(long, default_value_t = RansacConfig::default().inlier_threshold)]
    pub ransac_threshold: f64,
    /// Maximum RANSAC iterations.
    #[arg(long, default_value_t = RansacConfig::default().max_iterations)]
    pub ransac_iters: usize,
    /// Confidence of drawing one all-inlier sample.
    #[arg(long, default_value_t = RansacConfig::default().confidence)]
    pub confidence: f64,
    /// RANSAC seed.
    #[arg(long, default_value_t = RansacConfig::default().rng_seed)]
    pub seed: u64,
}

impl RansacArgs {
    pub fn config(&self) -> RansacConfig {
        RansacConfig {
            max_iterations: self.ransac_iters,
            inlier_threshold: self.ransac_threshold,
            confidence: self.confidence,
            rng_seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Initial Huber scale, pixels.
    #[arg(long, default_value_t = AnnealSchedule::default().delta0)]
    pub delta0: f64,
    /// Initial pruning threshold, pixels.
    #[arg(long, default_value_t = AnnealSchedule::default().eps0)]
    pub eps0: f64,
    #[arg(long, default_value_t = AnnealSchedule::default().delta_min)]
    pub delta_min: f64,
    #[arg(long, default_value_t = AnnealSchedule::default().eps_min)]
    pub eps_min: f64,
    /// Cooling factor for delta.
    #[arg(long, default_value_t = AnnealSchedule::default().lambda_delta)]
    pub lambda_delta: f64,
    /// Cooling factor for eps.
    #[arg(long, default_value_t = AnnealSchedule::default().lambda_eps)]
    pub lambda_eps: f64,
    /// Annealing iterations.
    #[arg(long, default_value_t = AnnealSchedule::default().t_max)]
    pub tmax: usize,
}

impl ScheduleArgs {
    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            delta0: self.delta0,
            eps0: self.eps0,
            delta_min: self.delta_min,
            eps_min: self.eps_min,
            lambda_delta: self.lambda_delta,
            lambda_eps: self.lambda_eps,
            t_max: self.tmax,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Domain(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Domain(e) => match e {
                Error::Cheirality { .. }
                | Error::Underdetermined { .. }
                | Error::Degenerate(_)
                | Error::InsufficientData { .. } => EXIT_GEOMETRY,
                Error::NoConsensus { .. } => EXIT_NO_CONSENSUS,
                Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_IO,
            },
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Triangulate(a) => cmd_triangulate(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn read_project(path: &Path) -> Result<ProjectFile, CliError> {
    let project: ProjectFile = read_json(path)?;
    project.validate().map_err(|e| IoError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(project)
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required without --project")))
}

fn missing_section(path: &Path, section: &str) -> CliError {
    CliError::Io(IoError::Parse {
        path: path.to_owned(),
        message: format!("project has no \"{section}\" section"),
    })
}

fn read_camera(path: &Path) -> Result<Camera, CliError> {
    let camera: Camera = read_json(path)?;
    camera.validate().map_err(|e| IoError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(camera)
}

pub fn cmd_triangulate(args: &TriangulateArgs) -> Result<(), CliError> {
    let (observations, poses, camera) = match &args.project {
        Some(path) => {
            let p = read_project(path)?;
            let obs = p.observations.ok_or_else(|| missing_section(path, "observations"))?;
            let poses = p.poses.ok_or_else(|| missing_section(path, "poses"))?;
            (obs, poses, p.camera)
        }
        None => {
            let obs: Vec<Observation> = read_json(required(&args.observations, "observations")?)?;
            let poses: Vec<ImagePose> = read_json(required(&args.poses, "poses")?)?;
            (obs, poses, read_camera(required(&args.camera, "camera")?)?)
        }
    };
    let tri = triangulate_with(&observations, &poses, &camera, args.exec.execution())?;
    write_json_atomic(&args.output, &tri.landmarks)?;
    eprintln!(
        "triangulated {} landmarks, rms reprojection {:.4} px",
        tri.landmarks.len(),
        tri.rms_px
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub version: u32,
    pub ransac: RansacConfig,
    pub schedule: AnnealSchedule,
    pub initial_pose: Pose,
    pub pose: Pose,
    pub ransac_iterations: usize,
    /// Input positions of the RANSAC consensus set.
    pub ransac_inliers: Vec<usize>,
    /// Input positions pruned during refinement.
    pub removed: Vec<usize>,
    pub surviving: Vec<usize>,
    pub trace: Vec<IterationRecord>,
    /// Present when the input carries a reference pose.
    pub score_before: Option<PoseScore>,
    pub score_after: Option<PoseScore>,
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let ransac = args.ransac.config();
    let schedule = args.schedule.schedule();
    ransac.validate()?;
    schedule.validate()?;

    let (correspondences, landmarks, camera, truth) = match &args.input.project {
        Some(path) => {
            let p = read_project(path)?;
            let corrs = p
                .correspondences
                .ok_or_else(|| missing_section(path, "correspondences"))?;
            (corrs, p.landmarks, p.camera, p.truth)
        }
        None => {
            let corrs: Vec<Correspondence> =
                read_json(required(&args.correspondences, "correspondences")?)?;
            let landmarks: LandmarkSet = read_json(required(&args.input.landmarks, "landmarks")?)?;
            (corrs, landmarks, read_camera(required(&args.input.camera, "camera")?)?, None)
        }
    };

    let est = estimate(&correspondences, &landmarks, &camera, &ransac, &schedule)?;
    let (score_before, score_after) = match &truth {
        Some(t) => (
            Some(PoseScore::new(t, &est.initial_pose())?),
            Some(PoseScore::new(t, &est.pose())?),
        ),
        None => (None, None),
    };
    let report = EstimateReport {
        version: SCHEMA_VERSION,
        ransac,
        schedule,
        initial_pose: est.initial_pose(),
        pose: est.pose(),
        ransac_iterations: est.ransac.iterations_run,
        ransac_inliers: (0..correspondences.len())
            .filter(|&i| est.ransac.inlier_mask[i])
            .collect(),
        removed: est.removed(),
        surviving: est.surviving(),
        trace: est.refined.trace.clone(),
        score_before,
        score_after,
    };
    create_dir(&args.out_dir)?;
    write_json_atomic(&args.out_dir.join("pose.json"), &est.pose())?;
    write_json_atomic(&args.out_dir.join("report.json"), &report)?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Io(IoError::Io {
            path: dir.to_owned(),
            source,
        })
    })
}

fn scene_inputs(
    config: &Option<PathBuf>,
    camera: &Option<PathBuf>,
    landmarks: &Option<PathBuf>,
    n_scenes: Option<usize>,
    seed: Option<u64>,
) -> Result<(SceneConfig, Camera, LandmarkSet), CliError> {
    let mut cfg: SceneConfig = match config {
        Some(p) => read_json(p).map_err(|e| match e {
            IoError::Parse { .. } => CliError::Usage(e.to_string()),
            e => CliError::Io(e),
        })?,
        None => SceneConfig::default(),
    };
    if let Some(n) = n_scenes {
        cfg.n_scenes = n;
    }
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    cfg.validate()?;
    let camera = match camera {
        Some(p) => read_camera(p)?,
        None => Camera::default(),
    };
    let landmarks = match landmarks {
        Some(p) => read_json(p)?,
        None => default_landmarks(),
    };
    Ok((cfg, camera, landmarks))
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let ransac = args.ransac.config();
    let schedule = args.schedule.schedule();
    let (cfg, camera, landmarks) = scene_inputs(
        &args.config,
        &args.camera,
        &args.landmarks,
        args.n_scenes,
        args.scene_seed,
    )?;
    let report = run_benchmark(&cfg, &landmarks, &camera, &ransac, &schedule, args.exec.execution())?;
    report.write_dir(&args.out_dir)?;
    match (report.mean_before, report.mean_after) {
        (Some(b), Some(a)) => eprintln!(
            "{} scenes, {} failed; mean S {:.6} -> {:.6}; removed {} ({} true outliers of {})",
            report.n_scenes,
            report.n_failed,
            b.s,
            a.s,
            report.total_removed,
            report.true_removals,
            report.total_outliers
        ),
        _ => eprintln!("{} scenes, {} failed", report.n_scenes, report.n_failed),
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let (cfg, camera, landmarks) = scene_inputs(
        &args.config,
        &args.camera,
        &args.landmarks,
        args.n_scenes,
        args.scene_seed,
    )?;
    let scenes = generate_scenes(&cfg, &landmarks, &camera, args.exec.execution())?;
    if let Some(dir) = &args.projects {
        create_dir(dir)?;
        for (i, scene) in scenes.iter().enumerate() {
            let mut project = ProjectFile::new(camera, landmarks.clone());
            project.correspondences = Some(scene.correspondences.clone());
            project.truth = Some(scene.truth_pose);
            write_json_atomic(&dir.join(format!("scene_{i:05}.json")), &project)?;
        }
    }
    let set = SceneSet {
        version: SCHEMA_VERSION,
        config: cfg,
        camera,
        landmarks,
        scenes,
    };
    write_json_atomic(&args.output, &set)?;
    Ok(())
}
