use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised while talking to an external or built-in prediction oracle.
#[derive(Debug, Error)]
pub enum OracleFailure {
    #[error("failed to spawn oracle process `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("oracle handshake mismatch: expected {expected}, child declared {declared}")]
    Handshake { expected: String, declared: String },
    #[error("oracle did not reply within {timeout_ms} ms")]
    Timeout { timeout_ms: u64 },
    #[error("oracle process exited or closed its pipe: {detail}")]
    Exited { detail: String },
    #[error("malformed oracle reply ({reason}): {payload}")]
    Malformed { reason: String, payload: String },
    #[error("oracle returned {found} probability vectors for a batch of {expected}")]
    BatchLength { expected: usize, found: usize },
    #[error("instance {index}: expected {expected} class probabilities, got {found}")]
    Shape {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("instance {index}: invalid probability vector {probs:?} ({reason})")]
    InvalidProbability {
        index: usize,
        probs: Vec<f64>,
        reason: String,
    },
    #[error("instance {instance:?} lies outside the lookup table domain")]
    OutsideDomain { instance: Vec<f64> },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "{form} form supports at most {limit} players but the game has {n}; \
         use Monte Carlo estimation for larger coalitions"
    )]
    TooManyPlayers {
        form: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("characteristic function returned non-finite value {value} for coalition {subset}")]
    NonFiniteValue { subset: String, value: f64 },
    #[error("{what}: expected size {expected}, found {found}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("feature index {index} out of range for {n} features")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing {0}")]
    MissingStructure(&'static str),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("attribution has no positive entries")]
    NoPositiveAttribution,
    #[error("attribution is incomplete: feature {0} was not computed")]
    IncompleteAttribution(usize),
    #[error("cannot combine attributions produced by different methods ({0} vs {1})")]
    MethodMismatch(String, String),
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Oracle(#[from] OracleFailure),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures that originate in the prediction oracle.
    pub fn is_oracle_failure(&self) -> bool {
        matches!(self, Error::Oracle(_))
    }
}
