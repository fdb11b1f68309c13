use mann_core::CoreError;
use mann_tasks::TaskError;
use mann_verify::VerifyError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: message.into() }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: ErrorKind,
            code: i32,
            message: &'a str,
        }
        let message = self.message.replace('\n', " ");
        serde_json::to_string(&Line { error: self.kind, code: self.kind.exit_code(), message: &message })
            .expect("error lines serialize")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::config(e.to_string()),
            CoreError::Diverged { .. } | CoreError::NotNormalized(_) => CliError::numerical(e.to_string()),
            CoreError::Task(t) => t.into(),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Core(c) => c.into(),
            VerifyError::Task(t) => t.into(),
            VerifyError::Toml(_) | VerifyError::Hypothesis(_) | VerifyError::Perplexity { .. } => {
                CliError::config(e.to_string())
            }
            other => CliError::data(other.to_string()),
        }
    }
}
