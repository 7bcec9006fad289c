//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: requested {requested}, supported range is {min}..={max}")]
    UnsupportedDegree {
        what: &'static str,
        requested: usize,
        min: usize,
        max: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate cell: Jacobian determinant {det:.3e} is not positive")]
    DegenerateCell { det: f64 },

    #[error("dof functional matrix is ill-conditioned (cond {cond:.3e} >= {limit:.1e}); bad functional basis")]
    IllConditionedBasis { cond: f64, limit: f64 },

    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem case: {0}")]
    InvalidCase(String),

    #[error("error norm requires exact field `{field}` which the case does not provide")]
    MissingExactField { field: &'static str },

    #[error("sparse Cholesky factorization failed ({detail}) and CG fallback did not converge (residual {residual:.3e} after {iterations} iterations)")]
    SolveFailed {
        detail: String,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid rate computation input: {0}")]
    InvalidRates(String),

    #[error("invalid study config: {0}")]
    InvalidConfig(String),

    #[error("study failed for case {case}, p={p}, level {level}: {source}")]
    Study {
        case: String,
        p: usize,
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
