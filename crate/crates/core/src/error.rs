use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("index {index} out of range 1..={max} for {context}")]
    Index {
        context: &'static str,
        index: usize,
        max: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        SimError::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
