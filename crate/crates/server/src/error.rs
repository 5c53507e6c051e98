use shala_core::pipeline::{PipelineError, TaskKind};
use shala_core::text::TextError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{0}")]
    InvalidCharacter(String),
    #[error("no model loaded for {0}")]
    ModelMissing(TaskKind),
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("session {0} is finalized")]
    SessionFinalized(String),
    #[error("invalid correction: {0}")]
    InvalidCorrection(String),
    #[error("unsupported export format {0:?}")]
    FormatUnsupported(String),
    #[error("session log {path}: {message}")]
    CorruptLog { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Stable name used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::InvalidCharacter(_) => "InvalidCharacter",
            ServiceError::ModelMissing(_) => "ModelMissing",
            ServiceError::SessionNotFound(_) => "SessionNotFound",
            ServiceError::SessionFinalized(_) => "SessionFinalized",
            ServiceError::InvalidCorrection(_) => "InvalidCorrection",
            ServiceError::FormatUnsupported(_) => "FormatUnsupported",
            ServiceError::CorruptLog { .. } => "CorruptLog",
            ServiceError::Io(_) | ServiceError::Internal(_) => "Internal",
        }
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidRequest(m) => ServiceError::InvalidRequest(m),
            PipelineError::ModelMissing(t) => ServiceError::ModelMissing(t),
            PipelineError::Text(t @ TextError::InvalidCharacter { .. }) => ServiceError::InvalidCharacter(t.to_string()),
            PipelineError::Text(t) => ServiceError::InvalidRequest(t.to_string()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}
