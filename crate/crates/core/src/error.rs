use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("label {gold} out of range for {classes} classes")]
    Label { gold: usize, classes: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    Vocabulary { id: usize, size: usize },

    #[error("error span ({start}, {end}) out of bounds for sentence of {len} tokens")]
    Annotation { start: usize, end: usize, len: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("alignment mismatch at sentence {sentence}: {message}")]
    Alignment { sentence: usize, message: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data or configuration rather than
    /// a failure while computing.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Vocabulary { .. }
                | Error::Annotation { .. }
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Data(_)
                | Error::Alignment { .. }
                | Error::Checkpoint(_)
                | Error::Io(_)
        )
    }
}
