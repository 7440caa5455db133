use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point lies on or behind the camera plane.
    #[error("cheirality violation: depth {depth} is not positive")]
    Cheirality { depth: f64 },

    #[error("landmark {landmark} has {observations} observation(s); at least 2 are required")]
    Underdetermined { landmark: usize, observations: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no consensus: no hypothesis reached {needed} inliers")]
    NoConsensus { needed: usize },

    #[error("quaternion is not unit (norm {norm})")]
    NonUnitQuaternion { norm: f64 },

    #[error("ground-truth translation has zero norm")]
    ZeroTranslation,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("heatmap is constant; no peak to decode")]
    NoPeak,

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("missing pose for image {image}")]
    MissingPose { image: usize },

    #[error("landmark index {index} out of range for {count} landmarks")]
    LandmarkIndex { index: usize, count: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
