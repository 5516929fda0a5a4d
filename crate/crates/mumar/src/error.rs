use std::path::PathBuf;

use thiserror::Error;

/// Errors shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not enough points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate point set: points are coincident or collinear, no unique plane")]
    DegenerateSet,

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("no face cluster survived filtering")]
    NoClustersSurvive,

    #[error("no seed sample satisfied the marker constraints after {restarts} restarts")]
    ConstraintsUnsatisfiable { restarts: usize },

    #[error("scene model is empty: the view shares no plane with the rest of the window")]
    EmptyScene,

    #[error("all candidate correspondences were rejected")]
    NoCorrespondences,

    #[error("registration did not converge")]
    NotConverged,

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed PLY: {message}")]
    PlyParse { path: PathBuf, message: String },

    #[error("view {view}, marker {marker}: {source}")]
    ViewContext {
        view: usize,
        marker: usize,
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

    /// Wraps an error with the view/marker pair it originated from, so that a
    /// failure deep inside a sequence run names the offending input.
    pub fn in_view(self, view: usize, marker: usize) -> Self {
        Error::ViewContext {
            view,
            marker,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
