use std::io;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vertex {0} is out of range")]
    VertexOutOfRange(u64),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error("execution error: {0}")]
    Execution(String),

    #[error("peer worker {0} aborted")]
    PeerAborted(usize),

    #[error("time limit of {0:?} exceeded")]
    TimeLimit(Duration),

    #[error("memory limit of {0} bytes exceeded")]
    MemoryLimit(u64),

    #[error("oracle refused: estimated {estimated:.3e} search nodes exceeds guard {guard:.0e}")]
    OracleGuard { estimated: f64, guard: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for errors raised by the cooperative time/memory budget.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::TimeLimit(_) | Error::MemoryLimit(_))
    }
}
