//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported mesh format: {path:?} (expected .obj or ASCII .ply)")]
    UnsupportedFormat { path: PathBuf },

    #[error("parse error in {path:?} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty mesh (no valid faces)")]
    EmptyMesh,

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("point cloud too small: need at least {needed} points, got {got}")]
    CloudTooSmall { needed: usize, got: usize },

    #[error("orientations have not been estimated for this cloud")]
    OrientationsMissing,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("degenerate cluster: all points coincide")]
    DegenerateCluster,

    #[error("curve {curve} crosses the near plane (control point depth <= {z_near})")]
    NearPlane { curve: usize, z_near: f64 },

    #[error("refinement failed at step {step}: {source}")]
    Refinement {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("service error: {msg}")]
    Service { msg: String },

    #[error("invalid mesh payload: {source}")]
    InvalidMeshPayload {
        #[source]
        source: Box<Error>,
    },

    #[error("gradient count mismatch: expected {expected}, got {got}")]
    GradientCount { expected: usize, got: usize },

    #[error("mismatched normalization transforms: curves were fitted on a differently normalized mesh")]
    TransformMismatch,

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: crate::pipeline::Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            msg: msg.into(),
        }
    }
}
