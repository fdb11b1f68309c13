use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("need at least {need} vectors, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("perplexity {perplexity} must be below a third of the point count {count}")]
    Perplexity { perplexity: f64, count: usize },
    #[error("all vectors are identical; t-SNE is undefined")]
    Degenerate,
    #[error("vectors have inconsistent dimensions")]
    Ragged,
    #[error("{0} vectors but {1} labels")]
    LabelCount(usize, usize),
    #[error("fewer than two distinct labels; consistency is untestable")]
    Untestable,
    #[error("hypothesis asserts nothing about any sample")]
    Vacuous,
    #[error("invalid hypothesis: {0}")]
    Hypothesis(String),
    #[error("traces carry no memory snapshots; record them at full level")]
    NoMemory,
    #[error("cell ({t}, {addr}) is out of range")]
    OutOfRange { t: usize, addr: usize },
    #[error(transparent)]
    Core(#[from] mann_core::CoreError),
    #[error(transparent)]
    Task(#[from] mann_tasks::TaskError),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
