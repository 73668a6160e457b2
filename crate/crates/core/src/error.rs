use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The generated graph has no edges; modularity is undefined for m = 0.
    #[error("degenerate instance: generated graph has no edges")]
    DegenerateInstance,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no grid point satisfies the polytope constraints")]
    EmptyFeasibleGrid,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("state space too large: {0}")]
    StateSpace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
