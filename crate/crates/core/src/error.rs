use thiserror::Error;

/// Errors raised by the game model, the strategies and the verifiers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value pair cannot be realised by a bi-balanced tree at this depth.
    #[error("infeasible value pair at {node}: {reason}")]
    Infeasible { node: String, reason: String },

    /// A strategy emitted a value outside its domain during a game.
    #[error("protocol violation in round {round}: {reason}")]
    Protocol { round: usize, reason: String },

    /// A decisive-only component received a bet outside {0, 1}.
    #[error("expected a decisive bet in {{0, 1}}, got {0}")]
    NotDecisive(f64),

    /// Exact enumeration was requested beyond its size guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The operation needs a complete transcript.
    #[error("transcript has {played} of {horizon} rounds")]
    IncompleteTranscript { played: usize, horizon: usize },

    /// An interactive session ended before the game was over.
    #[error("game aborted: {0}")]
    Aborted(String),

    /// An internal invariant of a strategy was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
