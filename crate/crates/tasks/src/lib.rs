//! Algorithmic tasks for memory-augmented networks.
//!
//! * [`mirror`]: reverse a sequence of random 9-bit vectors.
//! * [`m10ae`]: evaluate a parenthesis-free arithmetic expression where every
//!   intermediate result is reduced modulo 10 and `/` means modulo.
//! * [`probe`]: fixed-structure 500-sample probe sets for averaged analysis.
//! * [`strategy`]: symbolic executors of the hypothesized memory strategies,
//!   whose per-step state labels memory cells for verification.

pub mod dataset;
mod error;
pub mod m10ae;
pub mod mirror;
pub mod probe;
pub mod strategy;

pub use error::TaskError;

pub type Result<T, E = TaskError> = std::result::Result<T, E>;

/// Which task a dataset, probe set or model targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Mirror,
    M10ae,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Mirror => "mirror",
            TaskKind::M10ae => "m10ae",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mirror" => Ok(TaskKind::Mirror),
            "m10ae" => Ok(TaskKind::M10ae),
            other => Err(TaskError::UnknownTask(other.to_string())),
        }
    }
}
