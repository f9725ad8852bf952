//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum AtlasError {
    /// Malformed input: bad CSV rows, schema mismatches, invalid arguments.
    #[error("{0}")]
    Validation(String),

    /// The operation is not defined for the requested configuration.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Too few points (or too few usable points) for a construction.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Anchor difference directions are too close to linearly dependent.
    #[error(
        "degenerate star: normalized anchor differences have smallest singular value \
         {sigma_min:.3e}, below threshold {threshold:.3e}"
    )]
    DegenerateStar { sigma_min: f64, threshold: f64 },

    /// A moment system cannot be satisfied to within the configured threshold.
    #[error("infeasible moments: residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    InfeasibleMoments { residual: f64, threshold: f64 },

    /// Points or B-spline shifts left uncovered by a construction.
    #[error("coverage failure: {0}")]
    Coverage(String),

    /// A query point maps outside the extended cube of a tubular chart.
    #[error("query outside tube: extended coordinates reach sup-norm {norm:.3}")]
    OutOfTube { norm: f64 },

    /// A query point is not inside any chart, even after the fallback margin.
    #[error("out of coverage: nearest chart has coordinate sup-norm {norm:.3}")]
    OutOfCoverage { norm: f64 },

    /// Generic numerical failure (non-finite values, factorization breakdown).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl AtlasError {
    /// Process exit code: validation problems exit 2, numerical failures exit 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            AtlasError::Validation(_)
            | AtlasError::Unsupported(_)
            | AtlasError::Io(_)
            | AtlasError::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, AtlasError>;
