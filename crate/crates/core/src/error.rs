use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("unknown scenario `{0}` (expected two_level, lambda_a, lambda_b or lambda_c)")]
    UnknownScenario(String),

    #[error("{stage} did not converge (last residual {residual:.3e})")]
    NotConverged { stage: &'static str, residual: f64 },

    #[error("{stage}: {detail}")]
    Degenerate { stage: &'static str, detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("steady state has no Floquet-basis coefficients; run to_floquet_basis first")]
    MissingFloquetBasis,
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse(_)
            | Error::Invalid { .. }
            | Error::UnknownScenario(_) => ErrorKind::Input,
            Error::NotConverged { .. }
            | Error::Degenerate { .. }
            | Error::DimensionMismatch(_)
            | Error::MissingFloquetBasis => ErrorKind::Numerical,
        }
    }
}
