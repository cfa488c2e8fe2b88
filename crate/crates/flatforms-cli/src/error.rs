use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("precondition violated ({invariant}): {detail}")]
    Precondition { invariant: &'static str, detail: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn precondition(invariant: &'static str, detail: impl Into<String>) -> Self {
        CliError::Precondition { invariant, detail: detail.into() }
    }
}

/// Library errors surface as violated preconditions of the named computation.
pub trait Context<T> {
    fn context(self, invariant: &'static str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Context<T> for Result<T, E> {
    fn context(self, invariant: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::precondition(invariant, e.to_string()))
    }
}
