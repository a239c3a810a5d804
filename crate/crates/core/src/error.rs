use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid probability data: {0}")]
    InvalidProbability(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("action {action} is not available in state {state}")]
    UnavailableAction { state: usize, action: usize },

    #[error("Markov chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("MDP is not unichain: deterministic policy {witness:?} induces a non-ergodic chain")]
    NotUnichain { witness: Vec<usize> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no feasible point found: {0}")]
    NoFeasiblePoint(String),

    #[error("only {found} POIs survived clustering; cloaking needs at least k = {k}")]
    InsufficientPois { found: usize, k: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
