use thiserror::Error;

use crate::Vec3;

/// Errors produced anywhere in the watermarking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({}, {}, {}) is outside the field domain", .0.x, .0.y, .0.z)]
    OutOfDomain(Vec3),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("direction undefined at the origin")]
    UndefinedDirection,

    #[error("azimuthal gradient is singular on the z-axis")]
    SingularDirection,

    #[error("Newton inversion did not converge (best residual {best_residual:e})")]
    NonConvergence { best_residual: f64 },

    #[error("deformation Jacobian is singular (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("field has no zero crossing inside the sampling lattice")]
    EmptySurface,

    #[error("surface sampling exhausted: produced {produced} of {requested} points in {attempts} attempts")]
    SamplingExhausted {
        produced: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("no partition could be decoded")]
    UndecodableMessage,

    #[error("alignment failed: mean |G| = {residual:.4} exceeds {limit}")]
    AlignmentFailed { residual: f64, limit: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated data: expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::SingularJacobian { .. }
                | Error::SamplingExhausted { .. }
                | Error::AlignmentFailed { .. }
                | Error::EmptySurface
                | Error::UndecodableMessage
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
