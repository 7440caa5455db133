//! Rigid transforms, quaternion algebra and the pinhole camera.
//!
//! Quaternions are Hamilton, scalar-first. A [`Pose`] maps object
//! coordinates into the camera frame: `p_cam = R(q) * p_obj + t`.

use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{CorrespondenceWire, LandmarkSetWire, PoseWire};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when checking that a quaternion has unit norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    /// Raw constructor; does not normalize.
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis.x, s * axis.y, s * axis.z)
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let theta = v.norm();
        if theta < 1e-8 {
            // second-order Taylor expansion keeps the map smooth at zero
            let half = 0.5 * v;
            return Self::new(1.0 - theta * theta / 8.0, half.x, half.y, half.z).normalized();
        }
        Self::from_axis_angle(v, theta)
    }

    /// Logarithm map, returning the rotation vector with angle in [0, pi].
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = if self.w < 0.0 { -*self } else { *self };
        let v = q.vector();
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn to_rotation_matrix(&self) -> Mat3 {
        let Self { w, x, y, z } = *self;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        Mat3::new(
            1.0 - 2.0 * (yy + zz),
            2.0 * (xy - wz),
            2.0 * (xz + wy),
            2.0 * (xy + wz),
            1.0 - 2.0 * (xx + zz),
            2.0 * (yz - wx),
            2.0 * (xz - wy),
            2.0 * (yz + wx),
            1.0 - 2.0 * (xx + yy),
        )
    }

    /// Converts an orthonormal matrix (det +1) to a unit quaternion with w >= 0.
    pub fn from_rotation_matrix(m: &Mat3) -> Self {
        // Shepperd's method: branch on the largest diagonal term
        let trace = m.trace();
        let q = if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
            let s = 2.0 * (1.0 + trace).sqrt();
            Self::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt();
            Self::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt();
            Self::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        let q = q.normalized();
        if q.w < 0.0 {
            -q
        } else {
            q
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = self.vector();
        let uv = u.cross(v);
        v + 2.0 * self.w * uv + 2.0 * u.cross(&uv)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Rigid object-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseWire", into = "PoseWire")]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vec3,
}

impl Pose {
    /// Builds a pose, normalizing the rotation.
    pub fn new(rotation: Quaternion, translation: Vec3) -> Self {
        Self {
            rotation: rotation.normalized(),
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Quaternion::identity(), Vec3::zeros())
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `a.compose(b)` applies `b` first, then `a`.
    pub fn compose(&self, b: &Pose) -> Pose {
        Pose::new(
            self.rotation * b.rotation,
            self.rotation.rotate(&b.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let q = self.rotation.conjugate();
        Pose::new(q, -q.rotate(&self.translation))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Applies a tangent-space increment `[omega, dt]`: the rotation is
    /// left-multiplied by `exp(omega)` and the translation shifted by `dt`.
    pub fn retract(&self, delta: &nalgebra::Vector6<f64>) -> Pose {
        let omega = Vec3::new(delta[0], delta[1], delta[2]);
        let dt = Vec3::new(delta[3], delta[4], delta[5]);
        Pose::new(
            Quaternion::from_rotation_vector(&omega) * self.rotation,
            self.translation + dt,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.to_array().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Pinhole intrinsics plus image size. No distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Camera {
    /// Synthetic 1920x1200 camera.
    fn default() -> Self {
        Self {
            fx: 1000.0,
            fy: 1000.0,
            cx: 960.0,
            cy: 600.0,
            width: 1920,
            height: 1200,
        }
    }
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let camera = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        camera.validate()?;
        Ok(camera)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidConfig("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(format!(
                "image size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point.
    pub fn project_camera_point(&self, p: &Vec3) -> Result<Vec2> {
        if !(p.z > 0.0) {
            return Err(Error::Cheirality { depth: p.z });
        }
        Ok(Vec2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Normalized image coordinates `(x, y, 1)` of a pixel.
    pub fn unproject(&self, uv: &Vec2) -> Vec3 {
        Vec3::new((uv.x - self.cx) / self.fx, (uv.y - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, uv: &Vec2) -> bool {
        uv.x >= 0.0 && uv.x < self.width as f64 && uv.y >= 0.0 && uv.y < self.height as f64
    }

    pub fn intrinsic_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Ordered 3D landmarks in the object frame, metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LandmarkSetWire", into = "LandmarkSetWire")]
pub struct LandmarkSet {
    pub points: Vec<Vec3>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&Vec3> {
        self.points.get(index).ok_or(Error::LandmarkIndex {
            index,
            count: self.points.len(),
        })
    }
}

/// A 2D observation of a known landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrespondenceWire", into = "CorrespondenceWire")]
pub struct Correspondence {
    pub landmark_index: usize,
    pub image_point: Vec2,
    pub visible: bool,
}

impl Correspondence {
    pub fn new(landmark_index: usize, image_point: Vec2) -> Self {
        Self {
            landmark_index,
            image_point,
            visible: true,
        }
    }
}

/// Projects an object-frame point into the image.
pub fn project(pose: &Pose, point: &Vec3, camera: &Camera) -> Result<Vec2> {
    camera.project_camera_point(&pose.transform_point(point))
}

/// Projects every landmark and flags whether it lands inside the frame
/// with positive depth. Points behind the camera keep their (meaningless)
/// perspective division result.
pub fn project_landmarks(
    pose: &Pose,
    landmarks: &LandmarkSet,
    camera: &Camera,
) -> Vec<(Vec2, bool)> {
    landmarks
        .points
        .iter()
        .map(|x| {
            let p = pose.transform_point(x);
            let uv = Vec2::new(
                camera.fx * p.x / p.z + camera.cx,
                camera.fy * p.y / p.z + camera.cy,
            );
            let visible = p.z > 0.0 && camera.contains(&uv);
            (uv, visible)
        })
        .collect()
}

/// Cross-product matrix `[v]x`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
