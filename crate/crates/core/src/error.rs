use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The Fisher information for the angle is degenerate (e.g. `M_t = M_r = 1`).
    #[error("singular Fisher information: {0}")]
    SingularFisher(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("rank-deficient signal: S S^H is singular")]
    RankDeficientSignal,

    /// Phase-I certified infeasibility; `certificate` is the positive optimum
    /// of the auxiliary infeasibility scalar.
    #[error("problem is infeasible (phase-I certificate {certificate:.3e})")]
    Infeasible { certificate: f64 },

    #[error("numerical limit reached: {0}")]
    NumericalLimit(String),

    #[error("rank-one construction violated constraint `{constraint}` by {violation:.3e}")]
    ConstructionViolation { constraint: String, violation: f64 },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
