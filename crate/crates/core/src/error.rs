use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PimError>;

/// Identifies one piece of a partitioned or subsampled fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceId {
    Partition(usize),
    Iteration(usize),
}

impl fmt::Display for PieceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceId::Partition(s) => write!(f, "partition {s}"),
            PieceId::Iteration(b) => write!(f, "subsample iteration {b}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("design error: {0}")]
    Design(String),

    #[error("solver did not converge after {iterations} iterations (mean score norm {score_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        score_norm: f64,
        last_beta: Vec<f64>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate variance: standard error of coefficient {index} is {std_error}")]
    DegenerateVariance { index: usize, std_error: f64 },

    #[error("{piece} failed: {source}")]
    Piece {
        piece: PieceId,
        #[source]
        source: Box<PimError>,
    },

    #[error("replicate {replicate}, cell {cell}: {source}")]
    Replicate {
        replicate: usize,
        cell: String,
        #[source]
        source: Box<PimError>,
    },
}

impl PimError {
    /// The innermost error, looking through piece and replicate wrappers.
    pub fn root(&self) -> &PimError {
        match self {
            PimError::Piece { source, .. } | PimError::Replicate { source, .. } => source.root(),
            other => other,
        }
    }
}
