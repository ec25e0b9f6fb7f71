use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular Sylvester pencil: smallest eigenvalue sum {0:e}")]
    SingularPencil(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("non-finite iterate in block `{block}` at iteration {iteration}")]
    NonFinite { iteration: usize, block: &'static str },

    #[error("compositional data: row {row} sums to {sum} (expected 1)")]
    NotCompositional { row: usize, sum: f64 },

    #[error("{0}")]
    Degenerate(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
