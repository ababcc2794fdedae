use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("registry: {0}")]
    Registry(String),

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: &'static str,
        line: usize,
        message: String,
    },

    #[error("missing header in {0}")]
    MissingHeader(&'static str),

    #[error("no rows left after cleaning (input {input}, null target {null_target}, short days {short_days})")]
    EmptyAfterCleaning {
        input: usize,
        null_target: usize,
        short_days: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("model does not know feature `{0}`")]
    UnknownFeature(String),

    #[error("row is missing model feature `{0}`")]
    MissingFeature(String),

    #[error("expected {expected} feature values, got {got}")]
    FeatureCount { expected: usize, got: usize },

    #[error("model file schema version {found}, expected {expected}")]
    Version { found: String, expected: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("no anomaly limits for ({vehicle_group}, {route_type})")]
    MissingLimit {
        vehicle_group: String,
        route_type: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
