//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid construction: {0}")]
    GridConstruction(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("automaton: {0}")]
    Automaton(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("automaton is not complete: state {state} has no transition on {symbol}")]
    IncompleteAutomaton { state: String, symbol: String },

    #[error("observation sequence impossible under model at step {step}")]
    ImpossibleObservation { step: usize },

    #[error("numerical failure (non-finite value) at training pass {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("structurally incorrect digraph: {0}")]
    Structural(String),

    #[error("recovered transition marginals disagree for MDP state {state}: total variation {tv:.4} exceeds tolerance {tol}")]
    MarginalMismatch { state: usize, tv: f64, tol: f64 },

    #[error("automaton is inconsistent with the training episodes: {0}")]
    Inconsistent(String),

    #[error("state space too large: {size} exceeds cap {cap}")]
    StateSpaceTooLarge { size: usize, cap: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
