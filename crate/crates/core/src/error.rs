use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("observation has zero likelihood under the current belief")]
    ImpossibleObservation,

    #[error("instance too large for exhaustive planning ({states} states, horizon {horizon})")]
    SizeGuard { states: usize, horizon: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no trained entry for type {type_index} and policy {policy}")]
    MissingPair { type_index: usize, policy: usize },

    #[error("no traces to estimate from")]
    EmptyTraces,

    #[error("episode log is incomplete: {0}")]
    IncompleteLog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
