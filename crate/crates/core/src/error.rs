use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands disagree (player count or per-player dimension).
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric contract was broken at runtime (non-finite feedback, exhausted redraws, ...).
    #[error("runtime error at round {round}, player {player}: {message}")]
    Runtime {
        round: usize,
        player: usize,
        message: String,
    },

    /// An ordering or measurability contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid configuration file: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for usage or configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Json(_) | Error::Dimension { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
