//! JSON wire formats and atomic file output.
//!
//! Quaternions are serialized scalar-first: `{"q": [w, x, y, z], "t": [x, y, z]}`.
//! Floats go through serde_json's shortest round-trip representation, so every
//! `f64` read back is bit-identical to the one written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{Camera, Correspondence, LandmarkSet, Pose, Quaternion, Vec2, Vec3};
use crate::triangulation::Observation;

/// Current schema version of [`ProjectFile`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseWire {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl TryFrom<PoseWire> for Pose {
    type Error = Error;

    fn try_from(w: PoseWire) -> Result<Self, Error> {
        let q = Quaternion::new(w.q[0], w.q[1], w.q[2], w.q[3]);
        if !q.is_unit() {
            return Err(Error::NonUnitQuaternion { norm: q.norm() });
        }
        let t = Vec3::from(w.t);
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("translation must be finite".into()));
        }
        // keep already-unit input untouched so files round-trip bit for bit
        let rotation = if (q.norm() - 1.0).abs() <= 1e-12 {
            q
        } else {
            q.normalized()
        };
        Ok(Pose {
            rotation,
            translation: t,
        })
    }
}

impl From<Pose> for PoseWire {
    fn from(p: Pose) -> Self {
        Self {
            q: p.rotation.to_array(),
            t: p.translation.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkSetWire {
    pub points: Vec<[f64; 3]>,
}

impl From<LandmarkSetWire> for LandmarkSet {
    fn from(w: LandmarkSetWire) -> Self {
        LandmarkSet::new(w.points.into_iter().map(Vec3::from).collect())
    }
}

impl From<LandmarkSet> for LandmarkSetWire {
    fn from(l: LandmarkSet) -> Self {
        Self {
            points: l.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

fn default_visible() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceWire {
    pub landmark: usize,
    pub uv: [f64; 2],
    #[serde(default = "default_visible")]
    pub visible: bool,
}

impl TryFrom<CorrespondenceWire> for Correspondence {
    type Error = Error;

    fn try_from(w: CorrespondenceWire) -> Result<Self, Error> {
        if !w.uv.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "correspondence for landmark {} has a non-finite image point",
                w.landmark
            )));
        }
        Ok(Correspondence {
            landmark_index: w.landmark,
            image_point: Vec2::from(w.uv),
            visible: w.visible,
        })
    }
}

impl From<Correspondence> for CorrespondenceWire {
    fn from(c: Correspondence) -> Self {
        Self {
            landmark: c.landmark_index,
            uv: c.image_point.into(),
            visible: c.visible,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationWire {
    pub landmark: usize,
    pub image: usize,
    pub uv: [f64; 2],
}

impl TryFrom<ObservationWire> for Observation {
    type Error = Error;

    fn try_from(w: ObservationWire) -> Result<Self, Error> {
        if !w.uv.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "observation of landmark {} in image {} is not finite",
                w.landmark, w.image
            )));
        }
        Ok(Observation {
            landmark_index: w.landmark,
            image_index: w.image,
            image_point: Vec2::from(w.uv),
        })
    }
}

impl From<Observation> for ObservationWire {
    fn from(o: Observation) -> Self {
        Self {
            landmark: o.landmark_index,
            image: o.image_index,
            uv: o.image_point.into(),
        }
    }
}

/// Ground-truth pose of one image in a triangulation session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImagePoseWire", into = "ImagePoseWire")]
pub struct ImagePose {
    pub image: usize,
    pub pose: Pose,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePoseWire {
    pub image: usize,
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl TryFrom<ImagePoseWire> for ImagePose {
    type Error = Error;

    fn try_from(w: ImagePoseWire) -> Result<Self, Error> {
        Ok(Self {
            image: w.image,
            pose: Pose::try_from(PoseWire { q: w.q, t: w.t })?,
        })
    }
}

impl From<ImagePose> for ImagePoseWire {
    fn from(p: ImagePose) -> Self {
        let PoseWire { q, t } = p.pose.into();
        Self {
            image: p.image,
            q,
            t,
        }
    }
}

/// Self-contained bundle of everything one command needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFile {
    pub version: u32,
    pub camera: Camera,
    pub landmarks: LandmarkSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<Vec<ImagePose>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<Observation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondences: Option<Vec<Correspondence>>,
    /// Known pose for scoring; never seen by the estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Pose>,
}

impl ProjectFile {
    pub fn new(camera: Camera, landmarks: LandmarkSet) -> Self {
        Self {
            version: SCHEMA_VERSION,
            camera,
            landmarks,
            poses: None,
            observations: None,
            correspondences: None,
            truth: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.camera.validate()
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Nine significant digits, scientific notation. Used for every CSV float.
pub fn fmt_csv(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.8e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pose_json_is_scalar_first() {
        let pose = Pose::new(Quaternion::new(0.0, 1.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0));
        let text = serde_json::to_string(&pose).unwrap();
        assert_eq!(text, r#"{"q":[0.0,1.0,0.0,0.0],"t":[1.0,2.0,3.0]}"#);
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let err = serde_json::from_str::<Pose>(r#"{"q":[2,0,0,0],"t":[0,0,1]}"#).unwrap_err();
        assert!(err.to_string().contains("not unit"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":4,"k1":0.1}"#;
        assert!(serde_json::from_str::<Camera>(text).is_err());
        let text = r#"{"version":1,"camera":{"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":4},
                       "landmarks":{"points":[]},"extra":0}"#;
        assert!(serde_json::from_str::<ProjectFile>(text).is_err());
    }

    #[test]
    fn correspondence_visibility_defaults_true() {
        let c: Correspondence = serde_json::from_str(r#"{"landmark":3,"uv":[1.5,2.5]}"#).unwrap();
        assert!(c.visible);
        assert_eq!(c.landmark_index, 3);
    }

    #[test]
    fn image_pose_is_flat_object() {
        let p: ImagePose =
            serde_json::from_str(r#"{"image":4,"q":[1,0,0,0],"t":[0,0,5]}"#).unwrap();
        assert_eq!(p.image, 4);
        assert_eq!(p.pose.translation.z, 5.0);
    }

    #[test]
    fn csv_format_has_nine_significant_digits() {
        assert_eq!(fmt_csv(0.0117), "1.17000000e-2");
        assert_eq!(fmt_csv(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_json_atomic(&path, &Pose::identity()).unwrap();
        write_json_atomic(&path, &Pose::identity()).unwrap();
        let back: Pose = read_json(&path).unwrap();
        assert_eq!(back, Pose::identity());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn pose_json_roundtrips_bit_exact(w in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64,
                                          z in 0.1..1.0f64, t in proptest::array::uniform3(-1e3..1e3f64)) {
            let pose = Pose::new(Quaternion::new(w, x, y, z), Vec3::from(t));
            let back: Pose = serde_json::from_str(&serde_json::to_string(&pose).unwrap()).unwrap();
            prop_assert_eq!(back, pose);
        }
    }
}
