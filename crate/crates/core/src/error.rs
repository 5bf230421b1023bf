use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("mesh has no non-degenerate triangle")]
    DegenerateMesh,

    #[error("k-means: requested {k} clusters but the cloud has {points} points")]
    TooManyClusters { k: usize, points: usize },

    #[error("degenerate contact polygon")]
    DegenerateContactPolygon,

    #[error("ill-posed PPO system")]
    IllPosedPpo,

    #[error("ill-posed JPO system")]
    IllPosedJpo,

    #[error("joint update leaves joint {joint} outside its limits ({value} not in [{lo}, {hi}])")]
    JointBounds { joint: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid hand model: {0}")]
    InvalidHand(String),

    #[error("invalid hand state: {0}")]
    InvalidState(String),

    #[error("invalid planner config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GraspError {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        GraspError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GraspError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, GraspError>;
