use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// Why a network was judged non-generic (or not supertransversal) during a build.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degeneracy {
    /// A linear system that produced (or would produce) a vertex is too badly conditioned.
    IllConditioned { condition: f64, equations: Vec<usize> },
    /// A node map that was not solved for vanishes (within tolerance) at a vertex.
    NearZeroValue { node: usize, value: f64, equations: Vec<usize> },
    /// The solved equations do not vanish at the computed point.
    Residual { residual: f64, equations: Vec<usize> },
    /// A region with no incident vertex was asked for lower-dimensional faces.
    EmptyFacePool { region: String },
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Degeneracy::IllConditioned { condition, equations } => {
                write!(f, "condition estimate {condition:e} on equations {equations:?}")
            }
            Degeneracy::NearZeroValue { node, value, equations } => {
                write!(f, "node map {node} evaluates to {value:e} at the solution of {equations:?}")
            }
            Degeneracy::Residual { residual, equations } => {
                write!(f, "residual {residual:e} on equations {equations:?}")
            }
            Degeneracy::EmptyFacePool { region } => {
                write!(f, "region {region} has no incident vertex")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sign sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid model field `{field}`: {reason}")]
    InvalidModel { field: String, reason: String },

    #[error("sign prefix has a zero at node map {index}; not a top-dimensional region")]
    NotARegion { index: usize },

    #[error("unsupported architecture: first hidden layer has {n1} units but input dimension is {n0}")]
    ArchitectureUnsupported { n0: usize, n1: usize },

    #[error("degenerate network: {0}")]
    DegenerateNetwork(Degeneracy),

    #[error("vertex {signs} discovered twice at points {distance:e} apart")]
    DuplicateMismatch { signs: String, distance: f64 },

    #[error("complex is not closed: cell {cell} is missing face {missing}")]
    ClosureViolation { cell: String, missing: String },

    #[error("boundary of boundary is nonzero in degree {degree}")]
    BoundaryInconsistent { degree: usize },

    #[error("cannot parse sign sequence {0:?}")]
    SignParse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
