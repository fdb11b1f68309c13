//! Hypothesis verification for memory cells.
//!
//! A hypothesis claims that memory cell `addr` after step `t` holds some
//! symbolic quantity. Verification collects that cell over a probe set,
//! labels each vector with the claimed quantity, embeds the vectors in 2-D
//! for inspection, and scores how well labels cluster with a k-NN
//! consistency measure compared against the majority-label chance level.

pub mod cells;
pub mod consistency;
pub mod embed;
mod error;
pub mod fixtures;
pub mod hypothesis;
pub mod report;
pub mod svg;

pub use cells::{collect, label, LabelExpr, LabeledCellSet, Labeler, StrategyKind};
pub use consistency::{consistency, Consistency};
pub use embed::{embed, pca, tsne, Method, TsneParams};
pub use error::VerifyError;
pub use hypothesis::{AnalysisParams, HypothesisSpec, Space, Thresholds, Verdict};
pub use report::{verify, verify_cells, verify_traces, VerificationReport};

pub type Result<T, E = VerifyError> = std::result::Result<T, E>;
