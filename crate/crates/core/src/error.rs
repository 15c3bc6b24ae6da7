//! Crate-wide error type and the exit-code taxonomy used by the CLI.

use thiserror::Error;

/// Errors produced by parsing, analysis, and synthesis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (trace text, XES, or PNML).
    #[error("parse error: {0}")]
    Parse(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A configured resource bound was exceeded during exploration.
    #[error("{context}: state count exceeded the configured bound of {limit}")]
    StateLimit { context: &'static str, limit: usize },

    /// Brute-force enumeration was requested beyond its size bound.
    #[error("brute-force bound exceeded: {got} states, bound is {bound}")]
    BruteForceBound { got: usize, bound: usize },

    /// Power iteration failed to converge within the iteration cap.
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    /// Random simulation could not reach a final marking.
    #[error("simulation could not reach a final marking within {0} steps")]
    FinalUnreachable(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code taxonomy: 0 ok / 2 parse / 3 precondition / 4 resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Precondition(_) => 3,
            Error::StateLimit { .. }
            | Error::BruteForceBound { .. }
            | Error::NonConvergence(_)
            | Error::FinalUnreachable(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
