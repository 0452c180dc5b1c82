use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state has non-finite amplitudes (last finite time t = {last_finite_t})")]
    Diverged { last_finite_t: f64 },

    #[error("{quantity} drift {drift:.3e} exceeds tolerance {tol:.1e} at t = {t}")]
    DriftExceeded {
        quantity: DriftQuantity,
        drift: f64,
        tol: f64,
        t: f64,
    },

    #[error(
        "closed-form spectrum requires K1 == K2 (got {k1} and {k2}); use the linearization matrix"
    )]
    UnsupportedClosedForm { k1: f64, k2: f64 },

    #[error("eigenvalue iteration did not converge for the 4x4 linearization matrix")]
    EigenNoConvergence,

    #[error("state dimensions do not match: expected {expected} sites, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftQuantity {
    Norm,
    Energy,
}

impl std::fmt::Display for DriftQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriftQuantity::Norm => f.write_str("norm"),
            DriftQuantity::Energy => f.write_str("energy"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
