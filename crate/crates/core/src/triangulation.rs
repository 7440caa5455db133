//! Multi-view landmark reconstruction from posed images.
//!
//! Each landmark is solved on its own: a linear DLT estimate in normalized
//! image coordinates, then a small Levenberg-Marquardt polish of the pixel
//! reprojection error.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{ordered_map, Execution};
use crate::geometry::{Camera, LandmarkSet, Pose, Vec2, Vec3};
use crate::io::{ImagePose, ObservationWire};

/// Smallest admissible angle between two viewing rays of one landmark.
pub const MIN_TRIANGULATION_ANGLE: f64 = 1e-4;
const POLISH_MAX_ITERATIONS: usize = 50;
const POLISH_MIN_DECREASE: f64 = 1e-12;

/// One landmark seen in one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationWire", into = "ObservationWire")]
pub struct Observation {
    pub landmark_index: usize,
    pub image_index: usize,
    pub image_point: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub point: Vec3,
    /// Sum of squared pixel residuals at the DLT estimate.
    pub initial_cost: f64,
    /// Sum of squared pixel residuals after polishing.
    pub final_cost: f64,
    pub iterations: usize,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub landmarks: LandmarkSet,
    pub per_point: Vec<PointSolution>,
    /// RMS pixel residual over every observation.
    pub rms_px: f64,
}

pub fn triangulate(
    observations: &[Observation],
    poses: &[ImagePose],
    camera: &Camera,
) -> Result<Triangulation> {
    triangulate_with(observations, poses, camera, Execution::default())
}

pub fn triangulate_with(
    observations: &[Observation],
    poses: &[ImagePose],
    camera: &Camera,
    exec: Execution,
) -> Result<Triangulation> {
    camera.validate()?;
    let mut pose_by_image = BTreeMap::new();
    for p in poses {
        if pose_by_image.insert(p.image, p.pose).is_some() {
            return Err(Error::InvalidInput(format!(
                "image {} has more than one pose",
                p.image
            )));
        }
    }

    let count = match observations.iter().map(|o| o.landmark_index).max() {
        Some(m) => m + 1,
        None => return Ok(empty_triangulation()),
    };
    let mut grouped: Vec<Vec<(Pose, Vec2)>> = vec![Vec::new(); count];
    let mut seen = BTreeMap::new();
    for o in observations {
        let pose = pose_by_image
            .get(&o.image_index)
            .ok_or(Error::MissingPose {
                image: o.image_index,
            })?;
        if seen.insert((o.landmark_index, o.image_index), ()).is_some() {
            return Err(Error::InvalidInput(format!(
                "landmark {} observed twice in image {}",
                o.landmark_index, o.image_index
            )));
        }
        grouped[o.landmark_index].push((*pose, o.image_point));
    }

    let solved = ordered_map(exec, &grouped, |landmark, views| {
        triangulate_point(views, camera).map_err(|e| match e {
            Error::Underdetermined { observations, .. } => Error::Underdetermined {
                landmark,
                observations,
            },
            Error::Degenerate(msg) => Error::Degenerate(format!("landmark {landmark}: {msg}")),
            other => other,
        })
    });
    let per_point = solved.into_iter().collect::<Result<Vec<_>>>()?;

    let total_cost: f64 = per_point.iter().map(|p| p.final_cost).sum();
    let rms_px = (total_cost / observations.len() as f64).sqrt();
    Ok(Triangulation {
        landmarks: LandmarkSet::new(per_point.iter().map(|p| p.point).collect()),
        per_point,
        rms_px,
    })
}

fn empty_triangulation() -> Triangulation {
    Triangulation {
        landmarks: LandmarkSet::new(Vec::new()),
        per_point: Vec::new(),
        rms_px: 0.0,
    }
}

/// Triangulates one point from `(camera pose, pixel)` views.
pub fn triangulate_point(views: &[(Pose, Vec2)], camera: &Camera) -> Result<PointSolution> {
    if views.len() < 2 {
        return Err(Error::Underdetermined {
            landmark: 0,
            observations: views.len(),
        });
    }
    let max_angle = max_ray_angle(views, camera);
    if max_angle < MIN_TRIANGULATION_ANGLE {
        return Err(Error::Degenerate(format!(
            "viewing rays are nearly parallel (max angle {max_angle:.3e} rad)"
        )));
    }

    let initial = dlt(views, camera)?;
    check_cheirality(views, &initial)?;
    let initial_cost = reprojection_cost(views, camera, &initial)
        .ok_or(Error::Cheirality { depth: 0.0 })?;
    let (point, final_cost, iterations) = polish(views, camera, initial, initial_cost);
    check_cheirality(views, &point)?;

    Ok(PointSolution {
        point,
        initial_cost,
        final_cost,
        iterations,
        observations: views.len(),
    })
}

fn max_ray_angle(views: &[(Pose, Vec2)], camera: &Camera) -> f64 {
    let rays: Vec<Vec3> = views
        .iter()
        .map(|(pose, uv)| {
            pose.rotation
                .conjugate()
                .rotate(&camera.unproject(uv))
                .normalize()
        })
        .collect();
    let mut best = 0.0f64;
    for (i, a) in rays.iter().enumerate() {
        for b in &rays[i + 1..] {
            best = best.max(a.cross(b).norm().atan2(a.dot(b)));
        }
    }
    best
}

fn dlt(views: &[(Pose, Vec2)], camera: &Camera) -> Result<Vec3> {
    let mut a = DMatrix::<f64>::zeros(2 * views.len(), 4);
    for (k, (pose, uv)) in views.iter().enumerate() {
        let m = camera.unproject(uv);
        let r = pose.rotation_matrix();
        let t = pose.translation;
        for col in 0..3 {
            a[(2 * k, col)] = m.x * r[(2, col)] - r[(0, col)];
            a[(2 * k + 1, col)] = m.y * r[(2, col)] - r[(1, col)];
        }
        a[(2 * k, 3)] = m.x * t.z - t.x;
        a[(2 * k + 1, 3)] = m.y * t.z - t.y;
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let (smallest, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let h = v_t.row(smallest);
    if h[3].abs() < 1e-12 * h.norm() {
        return Err(Error::Degenerate("point at infinity".into()));
    }
    Ok(Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

fn check_cheirality(views: &[(Pose, Vec2)], point: &Vec3) -> Result<()> {
    for (pose, _) in views {
        let depth = pose.transform_point(point).z;
        if !(depth > 0.0) {
            return Err(Error::Cheirality { depth });
        }
    }
    Ok(())
}

/// Sum of squared pixel residuals, `None` if any view sees the point
/// on or behind its image plane.
pub fn reprojection_cost(views: &[(Pose, Vec2)], camera: &Camera, point: &Vec3) -> Option<f64> {
    let mut cost = 0.0;
    for (pose, uv) in views {
        let proj = camera.project_camera_point(&pose.transform_point(point)).ok()?;
        cost += (proj - uv).norm_squared();
    }
    Some(cost)
}

fn polish(
    views: &[(Pose, Vec2)],
    camera: &Camera,
    mut point: Vec3,
    mut cost: f64,
) -> (Vec3, f64, usize) {
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < POLISH_MAX_ITERATIONS && cost > 0.0 {
        iterations += 1;
        let mut h = Matrix3::zeros();
        let mut g = Vec3::zeros();
        for (pose, uv) in views {
            let p = pose.transform_point(&point);
            let (fx, fy) = (camera.fx, camera.fy);
            let inv_z = 1.0 / p.z;
            let e = Vec2::new(
                fx * p.x * inv_z + camera.cx - uv.x,
                fy * p.y * inv_z + camera.cy - uv.y,
            );
            let dproj = Matrix2x3::new(
                fx * inv_z,
                0.0,
                -fx * p.x * inv_z * inv_z,
                0.0,
                fy * inv_z,
                -fy * p.y * inv_z * inv_z,
            );
            let j = dproj * pose.rotation_matrix();
            h += j.transpose() * j;
            g += j.transpose() * e;
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = h;
            for d in 0..3 {
                damped[(d, d)] += lambda * h[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = point + step;
            match reprojection_cost(views, camera, &candidate) {
                Some(c) if c < cost => {
                    let decrease = cost - c;
                    point = candidate;
                    cost = c;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = decrease >= POLISH_MIN_DECREASE;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    (point, cost, iterations)
}
