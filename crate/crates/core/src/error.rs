use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation insufficient: need dimension {needed} (tail mass {tail_mass:.3e}) but cap is {max_dim}")]
    TruncationInsufficient {
        needed: usize,
        max_dim: usize,
        tail_mass: f64,
    },

    #[error("outside causal region: {0}")]
    Domain(String),

    #[error("quadrature did not converge: last refinement changed result by {change:.3e} (tolerance {tolerance:.3e})")]
    QuadratureNonconvergence { change: f64, tolerance: f64 },

    #[error("visibility undefined: both arm states vanish")]
    UndefinedVisibility,

    #[error("degenerate target: |<-beta|n>| = {overlap} leaves no admissible window")]
    DegenerateTarget { overlap: f64 },

    #[error("non-generic target: |sum of modulated coefficients| = {sum:.3e}")]
    NongenericTarget { sum: f64 },

    #[error("divergent coefficients: {0}")]
    DivergentCoefficients(String),

    #[error("optimizer did not converge: {0}")]
    OptimizerNonconvergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonconvergence { .. }
                | Error::OptimizerNonconvergence(_)
                | Error::TruncationInsufficient { .. }
                | Error::UndefinedVisibility
        )
    }
}
