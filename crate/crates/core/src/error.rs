use std::path::PathBuf;

use crate::gateway::GatewayError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown question type: {0:?}")]
    UnknownQuestionType(String),
    #[error("unknown error type: {0:?}")]
    UnknownErrorType(String),
    #[error("analysis for {0} has no topics")]
    EmptyTopics(String),
    #[error("no JSON object found in completion")]
    MalformedPayload,
    #[error("payload schema violation: {0}")]
    SchemaViolation(String),
    #[error("every diagnosis failed ({0} records)")]
    AllDiagnosesFailed(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("analyses disagree on type-topic key: {0} vs {1}")]
    MixedKeys(String, String),
    #[error("no enhancements to render")]
    NoEnhancements,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no validation items for category {0:?}")]
    NoValidationItems(String),
    #[error("no prompt for category {category:?} variant {variant}")]
    MissingPrompt { category: String, variant: String },
    #[error("unknown strategy: {0:?}")]
    UnknownStrategy(String),
    #[error("completion is empty")]
    EmptyCompletion,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no failed questions to work from")]
    NoFailures,
    #[error("invalid dataset {path}: line {line}: {reason}")]
    InvalidDataset {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure came from the model provider rather than from
    /// the inputs (the CLI maps these to exit code 2).
    pub fn is_provider_exhaustion(&self) -> bool {
        matches!(self, Error::Gateway(_))
    }
}
