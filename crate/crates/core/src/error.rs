use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation
    /// (non-positive price, ρ outside (0,1), negative coefficient, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A market instance violating a structural invariant.
    #[error("invalid market: {0}")]
    InvalidMarket(String),

    /// An iterative solver hit its iteration cap or lost its bracket.
    #[error("solver failed: {0}")]
    Solver(String),

    /// Initial prices outside `[p_min, p_max]^n`.
    #[error("price vector outside the invariant box [{p_min}, {p_max}]: {detail}")]
    OutOfBox {
        p_min: f64,
        p_max: f64,
        detail: String,
    },

    /// A cross-check oracle failed to converge; says nothing about the engine.
    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { what, index, len })
    }
}
