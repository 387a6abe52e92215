//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation contract (bad argument, stepping a
    /// terminated environment, mismatched buffer lengths, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A control input lies outside the admissible set.
    #[error("control input out of bounds: {0}")]
    ControlOutOfBounds(String),

    /// Numerical integration produced a non-finite state.
    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A map template admits no placement satisfying its constraints.
    #[error("infeasible map template: {0}")]
    InfeasibleTemplate(String),

    /// Observation/action dimensions disagree between a snapshot and an
    /// environment, or a CLI vector argument has the wrong arity.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A state that must be collision-free is not.
    #[error("state is not in free space: {0}")]
    StateNotFree(String),

    /// Training produced a non-finite loss or parameters.
    #[error("training error: {0}")]
    Training(String),

    /// Malformed snapshot file.
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
