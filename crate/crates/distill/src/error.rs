use crate::formats::FormatError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io: {0}")]
    Io(String),
}

impl HarnessError {
    /// 1 for bad input of any kind, 2 for a numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numeric(_) => 2,
            _ => 1,
        }
    }
}

impl From<distill_core::Error> for HarnessError {
    fn from(e: distill_core::Error) -> Self {
        if e.is_numeric() {
            HarnessError::Numeric(e.to_string())
        } else {
            HarnessError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
