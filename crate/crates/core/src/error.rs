use thiserror::Error;

use crate::design_space::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid design parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("parameter vector has length {got}, expected {expected} (2D+3 with D={dof})")]
    VectorLength { expected: usize, got: usize, dof: usize },

    #[error("invalid joint type code {0} (expected 0=Roll, 1=Pitch, 2=Yaw)")]
    InvalidTypeCode(f64),

    #[error("joint angle {value} at index {index} outside [-2.4, 2.4] rad")]
    JointOutOfRange { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
