use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RcrError>;

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or unsuitable input data.
    Data,
    /// The numerics could not produce a well-defined answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum RcrError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("response column {0:?} not found in header")]
    MissingColumn(String),

    #[error("need at least {needed} rows for {p} regressor(s), got {got}")]
    TooFewRows { got: usize, needed: usize, p: usize },

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("observation {row} coincides with the centroid (zero distance)")]
    ZeroDistance { row: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fitted hyperplane is vertical in Y; slopes are not expressible")]
    VerticalFit,

    #[error("smallest eigenvalue is repeated; fitted direction is ambiguous")]
    AmbiguousDirection,

    #[error("sign of the weighted XY cross moment is undefined (S_XY = 0)")]
    SignUndefined,

    #[error("slope {beta} lies outside the compound bracket [{lo}, {hi}]")]
    OutsideBracket { beta: f64, lo: f64, hi: f64 },

    #[error("slope component {coordinate} is zero where a finite X-direction residual is required")]
    ZeroSlope { coordinate: usize },

    #[error("all starts diverged toward the beta_{coordinate} = 0 singularity")]
    Singularity { coordinate: usize },

    #[error("{0} did not converge")]
    NonConvergence(&'static str),

    #[error("{failed} of {total} replicates failed (limit {limit_pct}%)")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit_pct: u32,
    },
}

impl RcrError {
    pub fn kind(&self) -> ErrorKind {
        use RcrError::*;
        match self {
            Io { .. }
            | Csv(_)
            | NonNumeric { .. }
            | MissingColumn(_)
            | TooFewRows { .. }
            | NonFinite { .. }
            | InvalidInput(_)
            | ZeroDistance { .. } => ErrorKind::Data,
            _ => ErrorKind::Numerical,
        }
    }
}
