//! Hypothesis specification files and verdict thresholds.

use std::path::{Path, PathBuf};

use mann_tasks::strategy::DEFAULT_TANN_START;
use mann_tasks::TaskKind;
use serde::{Deserialize, Serialize};

use crate::cells::{LabelExpr, StrategyKind};
use crate::consistency::DEFAULT_K;
use crate::embed::{Method, TsneParams};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Supported,
    Rejected,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Supported => "supported",
            Verdict::Rejected => "rejected",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum score for support.
    pub tau_hi: f64,
    /// Minimum margin above chance for support.
    pub chance_margin: f64,
    /// Score at or below which the hypothesis is rejected; defaults to
    /// chance plus `reject_margin`.
    pub tau_lo: Option<f64>,
    pub reject_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { tau_hi: 0.8, chance_margin: 0.3, tau_lo: None, reject_margin: 0.1 }
    }
}

impl Thresholds {
    pub fn verdict(&self, score: f64, chance: f64) -> Verdict {
        if score >= self.tau_hi && score - chance >= self.chance_margin {
            Verdict::Supported
        } else if score <= self.tau_lo.unwrap_or(chance + self.reject_margin) {
            Verdict::Rejected
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Where the consistency score that decides the verdict is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    #[default]
    Original,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub k: usize,
    pub method: Method,
    pub tsne: TsneParams,
    pub seed: u64,
    /// Standardize each cell dimension across samples before scoring.
    pub zscore: bool,
    pub space: Space,
    pub thresholds: Thresholds,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            method: Method::Tsne,
            tsne: TsneParams::default(),
            seed: 0,
            zscore: false,
            space: Space::Original,
            thresholds: Thresholds::default(),
        }
    }
}

fn default_tann_start() -> usize {
    DEFAULT_TANN_START
}

/// A hypothesis about one memory cell, e.g. "after step 1, the stack top
/// holds `x_1`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub name: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<PathBuf>,
    pub t: usize,
    pub addr: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyKind>,
    pub label: String,
    #[serde(default = "default_tann_start")]
    pub tann_start: usize,
    #[serde(default)]
    pub analysis: AnalysisParams,
}

impl HypothesisSpec {
    pub fn new(name: &str, task: TaskKind, t: usize, addr: usize, label: &str) -> Self {
        Self {
            name: name.to_string(),
            task,
            checkpoint: None,
            probes: None,
            t,
            addr,
            strategy: None,
            label: label.to_string(),
            tann_start: DEFAULT_TANN_START,
            analysis: AnalysisParams::default(),
        }
    }

    pub fn label_expr(&self) -> Result<LabelExpr> {
        self.label.parse()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.label_expr()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("hypothesis specs serialize")
    }
}
