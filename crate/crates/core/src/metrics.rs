//! Pose errors, competition scores, and bounding-box IOU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose, Quaternion, Vec2, Vec3};

/// Geodesic angle between two rotations, radians in [0, pi].
///
/// `2 acos(|w|)` where `w` is the real part of `q_true * conj(q_est)`.
pub fn rotation_error(q_true: &Quaternion, q_est: &Quaternion) -> Result<f64> {
    for q in [q_true, q_est] {
        if !q.is_unit() {
            return Err(Error::NonUnitQuaternion { norm: q.norm() });
        }
    }
    let w = (*q_true * q_est.conjugate()).w;
    Ok(2.0 * w.abs().clamp(0.0, 1.0).acos())
}

pub fn translation_error(t_true: &Vec3, t_est: &Vec3) -> f64 {
    (t_true - t_est).norm()
}

/// Translation error relative to the true distance.
pub fn translation_score(t_true: &Vec3, t_est: &Vec3) -> Result<f64> {
    let norm = t_true.norm();
    if norm == 0.0 {
        return Err(Error::ZeroTranslation);
    }
    Ok(translation_error(t_true, t_est) / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseScore {
    pub e_r_deg: f64,
    pub e_t_m: f64,
    pub s_r: f64,
    pub s_t: f64,
    pub s: f64,
}

impl PoseScore {
    pub fn new(truth: &Pose, estimate: &Pose) -> Result<Self> {
        let s_r = rotation_error(&truth.rotation, &estimate.rotation)?;
        let s_t = translation_score(&truth.translation, &estimate.translation)?;
        Ok(Self {
            e_r_deg: s_r.to_degrees(),
            e_t_m: translation_error(&truth.translation, &estimate.translation),
            s_r,
            s_t,
            s: s_r + s_t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::InvalidBox(format!(
                "({x_min}, {y_min}, {x_max}, {y_max}) has no area"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Minimum enclosing rectangle of `points`, grown on every side by
/// `relax * max(width, height)` and clamped to the image.
pub fn bbox_from_landmarks(points: &[Vec2], relax: f64, camera: &Camera) -> Result<BBox> {
    if points.is_empty() {
        return Err(Error::InvalidBox("no visible points".into()));
    }
    if !(relax >= 0.0) {
        return Err(Error::InvalidBox(format!("relax must be >= 0, got {relax}")));
    }
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x_min = x_min.min(p.x);
        y_min = y_min.min(p.y);
        x_max = x_max.max(p.x);
        y_max = y_max.max(p.y);
    }
    let pad = relax * (x_max - x_min).max(y_max - y_min);
    BBox::new(
        (x_min - pad).max(0.0),
        (y_min - pad).max(0.0),
        (x_max + pad).min(camera.width as f64),
        (y_max + pad).min(camera.height as f64),
    )
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}
