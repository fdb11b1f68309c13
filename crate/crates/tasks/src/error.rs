use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("sequence length must be at least 1")]
    EmptySequence,
    #[error("malformed expression at token {position}: {reason}")]
    Malformed { position: usize, reason: String },
    #[error("sequence of length {len} does not fit in {capacity} memory cells")]
    TooLong { len: usize, capacity: usize },
    #[error("step {t}, cell {addr} is outside the trace ({steps} steps, {cells} cells)")]
    OutOfBounds { t: usize, addr: usize, steps: usize, cells: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
