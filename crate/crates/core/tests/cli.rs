use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satpose::bench::default_landmarks;
use satpose::geometry::project;
use satpose::io::{ImagePose, ProjectFile};
use satpose::metrics::{rotation_error, translation_error};
use satpose::triangulation::Observation;
use satpose::{Camera, Correspondence, LandmarkSet, Pose, Quaternion};
use nalgebra::Vector3;
use tempfile::TempDir;

fn satpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satpose"))
        .args(args)
        .output()
        .expect("run satpose")
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

fn write(path: &Path, value: &impl serde::Serialize) -> PathBuf {
    std::fs::write(path, serde_json::to_string(value).unwrap()).unwrap();
    path.to_owned()
}

fn truth() -> Pose {
    Pose::new(
        Quaternion::from_axis_angle(&Vector3::new(0.2, 1.0, 0.4), 0.9),
        Vector3::new(0.3, -0.2, 9.0),
    )
}

fn posed_images() -> Vec<ImagePose> {
    (0..5)
        .map(|k| ImagePose {
            image: k,
            pose: Pose::new(
                Quaternion::from_axis_angle(&Vector3::y(), -0.5 + 0.25 * k as f64),
                Vector3::new(0.1 * k as f64, 0.0, 6.0),
            ),
        })
        .collect()
}

fn observations(lm: &LandmarkSet, poses: &[ImagePose], camera: &Camera) -> Vec<Observation> {
    poses
        .iter()
        .flat_map(|p| {
            lm.points.iter().enumerate().map(move |(i, x)| Observation {
                landmark_index: i,
                image_index: p.image,
                image_point: project(&p.pose, x, camera).unwrap(),
            })
        })
        .collect()
}

struct TriangulationFiles {
    dir: TempDir,
    obs: Vec<Observation>,
    poses: Vec<ImagePose>,
}

impl TriangulationFiles {
    fn new() -> Self {
        let camera = Camera::default();
        let poses = posed_images();
        let obs = observations(&default_landmarks(), &poses, &camera);
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("camera.json"), &camera);
        Self { dir, obs, poses }
    }

    fn run(&self) -> Output {
        let d = self.dir.path();
        write(&d.join("obs.json"), &self.obs);
        write(&d.join("poses.json"), &self.poses);
        satpose(&[
            "triangulate",
            "--observations",
            &s(&d.join("obs.json")),
            "--poses",
            &s(&d.join("poses.json")),
            "--camera",
            &s(&d.join("camera.json")),
            "-o",
            &s(&d.join("landmarks.json")),
        ])
    }
}

#[test]
fn triangulate_recovers_generating_landmarks() {
    let files = TriangulationFiles::new();
    let out = files.run();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(files.dir.path().join("landmarks.json")).unwrap();
    let got: LandmarkSet = serde_json::from_str(&text).unwrap();
    for (a, b) in got.points.iter().zip(&default_landmarks().points) {
        assert!((a - b).norm() < 1e-6);
    }
}

#[test]
fn triangulate_missing_pose_is_io_error() {
    let mut files = TriangulationFiles::new();
    files.poses.retain(|p| p.image != 3);
    let out = files.run();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("image 3"));
}

#[test]
fn triangulate_single_observation_is_degenerate() {
    let mut files = TriangulationFiles::new();
    files.obs.retain(|o| o.landmark_index != 4 || o.image_index == 0);
    let out = files.run();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn triangulate_malformed_json_is_io_error() {
    let files = TriangulationFiles::new();
    files.run();
    std::fs::write(files.dir.path().join("camera.json"), "{\"fx\": 1").unwrap();
    let d = files.dir.path();
    let out = satpose(&[
        "triangulate",
        "--observations",
        &s(&d.join("obs.json")),
        "--poses",
        &s(&d.join("poses.json")),
        "--camera",
        &s(&d.join("camera.json")),
        "-o",
        &s(&d.join("out.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn noiseless_project(dir: &Path) -> PathBuf {
    let camera = Camera::default();
    let lm = default_landmarks();
    let mut project = ProjectFile::new(camera, lm.clone());
    project.correspondences = Some(
        lm.points
            .iter()
            .enumerate()
            .map(|(i, x)| Correspondence::new(i, project_point(&truth(), x, &camera)))
            .collect(),
    );
    project.truth = Some(truth());
    write(&dir.join("project.json"), &project)
}

fn project_point(pose: &Pose, x: &Vector3<f64>, camera: &Camera) -> nalgebra::Vector2<f64> {
    project(pose, x, camera).unwrap()
}

#[test]
fn estimate_noiseless_project_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    let project = noiseless_project(dir.path());
    let out_dir = dir.path().join("out");
    let out = satpose(&["estimate", "--project", &s(&project), "-o", &s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let pose: Pose =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("pose.json")).unwrap()).unwrap();
    assert!(rotation_error(&truth().rotation, &pose.rotation).unwrap() < 1e-6);
    assert!(translation_error(&truth().translation, &pose.translation) < 1e-6);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["trace"].as_array().unwrap().len(), 10);
    assert_eq!(report["removed"].as_array().unwrap().len(), 0);
}

#[test]
fn estimate_from_separate_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let camera = Camera::default();
    let lm = default_landmarks();
    let corr: Vec<Correspondence> = lm
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| Correspondence::new(i, project_point(&truth(), x, &camera)))
        .collect();
    write(&d.join("camera.json"), &camera);
    write(&d.join("landmarks.json"), &lm);
    write(&d.join("corr.json"), &corr);
    let out = satpose(&[
        "estimate",
        "--correspondences",
        &s(&d.join("corr.json")),
        "--landmarks",
        &s(&d.join("landmarks.json")),
        "--camera",
        &s(&d.join("camera.json")),
        "-o",
        &s(&d.join("out")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("out").join("pose.json").exists());
}

#[test]
fn estimate_rejects_zero_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let project = noiseless_project(dir.path());
    let out = satpose(&["estimate", "--project", &s(&project), "--tmax", "0", "-o", &s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(64));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn estimate_without_consensus_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let camera = Camera::default();
    let lm = default_landmarks();
    let mut project = ProjectFile::new(camera, lm.clone());
    // scattered pixels with no common pose
    project.correspondences = Some(
        (0..lm.len())
            .map(|i| {
                let k = i as f64;
                Correspondence::new(i, nalgebra::Vector2::new(
                    (137.0 * k * k + 91.0) % 1900.0,
                    (311.0 * k + 53.0 * k * k) % 1180.0,
                ))
            })
            .collect(),
    );
    let path = write(&dir.path().join("p.json"), &project);
    let out = satpose(&["estimate", "--project", &s(&path), "--ransac-threshold", "1e-6", "-o", &s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(satpose(&["estimate"]).status.code(), Some(64));
    assert_eq!(satpose(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(satpose(&["estimate", "-o", "x"]).status.code(), Some(64));
    assert_eq!(satpose(&["--help"]).status.code(), Some(0));
}

#[test]
fn benchmark_writes_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"n_scenes": 25, "rng_seed": 4}"#).unwrap();
    let out_dir = dir.path().join("report");
    let out = satpose(&["benchmark", &s(&config), "-o", &s(&out_dir), "--tmax", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let evolution = std::fs::read_to_string(out_dir.join("score_evolution.csv")).unwrap();
    assert_eq!(evolution.lines().count(), 1 + 7);
    let scenes = std::fs::read_to_string(out_dir.join("scenes.csv")).unwrap();
    assert_eq!(scenes.lines().next().unwrap(), "scene_id,e_r_deg,e_t_m,s_r,s_t,s,iou,n_removed,converged");
    assert_eq!(scenes.lines().count(), 26);
    for f in ["report.json", "histogram_before.csv", "histogram_after.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn benchmark_with_no_scenes_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let out = satpose(&["benchmark", "--n-scenes", "0", "-o", &s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let report: satpose::bench::BenchmarkReport =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.n_scenes, 0);
    let scenes = std::fs::read_to_string(out_dir.join("scenes.csv")).unwrap();
    assert_eq!(scenes.lines().count(), 1);
}

#[test]
fn benchmark_invalid_config_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("depth.json", r#"{"depth_range": [0.0, 5.0]}"#),
        ("visible.json", r#"{"min_visible": 2}"#),
        ("unknown.json", r#"{"n_scenes": 3, "colour": "red"}"#),
    ] {
        let config = dir.path().join(name);
        std::fs::write(&config, text).unwrap();
        let out = satpose(&["benchmark", &s(&config), "-o", &s(&dir.path().join("r"))]);
        assert_eq!(out.status.code(), Some(64), "{name}");
    }
    let out = satpose(&["benchmark", "--n-scenes", "2", "--eps0", "-1", "-o", &s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn synth_scene_set_replays() {
    let dir = tempfile::tempdir().unwrap();
    let set_path = dir.path().join("set.json");
    let out = satpose(&["synth", "--n-scenes", "5", "--scene-seed", "3", "-o", &s(&set_path), "--projects", &s(&dir.path().join("p"))]);
    assert_eq!(out.status.code(), Some(0));
    let set: satpose::bench::SceneSet =
        serde_json::from_str(&std::fs::read_to_string(&set_path).unwrap()).unwrap();
    assert_eq!(set.scenes.len(), 5);
    let direct = satpose::bench::generate_scenes(
        &set.config,
        &set.landmarks,
        &set.camera,
        satpose::exec::Execution::Sequential,
    )
    .unwrap();
    assert_eq!(direct, set.scenes);
    assert!(dir.path().join("p").join("scene_00004.json").exists());
}
