use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("missing embedding vector for slide {slide_id:?} at token position {position}")]
    Lookup { slide_id: String, position: usize },

    #[error("non-finite loss at epoch {epoch}, slide {slide_id:?}")]
    NonFiniteLoss { epoch: usize, slide_id: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Precondition(_)
                | Error::Lookup { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
