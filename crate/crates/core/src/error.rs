use thiserror::Error;

use crate::rule::Diagnostic;
use crate::symbol::Ident;

#[derive(Debug, Error)]
pub enum Error {
    #[error("identifier {0} is not reachable from any state")]
    DanglingId(Ident),
    #[error("state {0} has been removed")]
    RemovedState(Ident),
    #[error("state {0} already has a substate")]
    SubstateExists(Ident),
    #[error("state stack reached the depth limit of {0}")]
    DepthLimit(usize),
    #[error("runaway elaboration after {waves} waves; still firing: {}", rules.join(", "))]
    Runaway { waves: usize, rules: Vec<String> },
    #[error("agent is halted")]
    Halted,
    #[error("{} load error(s){}", .0.len(), .0.first().map(|d| format!("; first: {d}")).unwrap_or_default())]
    Load(Vec<Diagnostic>),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("malformed file, line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
