use thiserror::Error;

/// Errors produced across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A mathematical precondition (normality, reachability setup) does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("unsupported state dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("target not reachable within horizon {horizon} s")]
    Unreachable { horizon: f64 },

    #[error("task horizon expired: elapsed {elapsed} s >= T = {horizon} s")]
    HorizonExpired { elapsed: f64, horizon: f64 },

    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Precondition(_)
            | Error::UnsupportedDimension(_)
            | Error::Validation(_)
            | Error::Json(_) => 2,
            Error::Divergence { .. } => 3,
            Error::Unreachable { .. } | Error::HorizonExpired { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
