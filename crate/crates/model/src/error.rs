use mars_chem::ChemError;
use mars_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected width {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("graph has no atoms")]
    EmptyGraph,
    #[error("non-finite loss at epoch {epoch} step {step} (record {record}): {detail}")]
    NonFiniteLoss { epoch: usize, step: usize, record: String, detail: String },
    #[error("no valid hypothesis survived decoding")]
    NoValidHypothesis,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

impl ModelError {
    /// Stable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::DimensionMismatch { .. } => "DimensionMismatch",
            ModelError::EmptyGraph => "EmptyGraph",
            ModelError::NonFiniteLoss { .. } => "NonFiniteLoss",
            ModelError::NoValidHypothesis => "NoValidHypothesis",
            ModelError::Config(_) => "Config",
            ModelError::Checkpoint(_) => "Checkpoint",
            ModelError::Io(_) => "Io",
            ModelError::Json(_) => "Json",
            ModelError::Core(e) => e.kind(),
            ModelError::Chem(_) => "ChemError",
        }
    }
}
