use mann_tasks::TaskError;
use mann_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("action distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("training diverged: {skipped} non-finite steps exceeded the budget")]
    Diverged { skipped: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
