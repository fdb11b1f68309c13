//! Verification reports and the pipeline that produces them.

use std::io::Write;
use std::path::Path;

use mann_core::introspect::{record, TraceLevel, TraceSet};
use mann_core::model::Model;
use mann_tasks::dataset::Dataset;
use mann_tasks::TaskKind;
use mann_tensor::Scalar;
use serde::{Deserialize, Serialize};

use crate::cells::{collect, label, LabeledCellSet, Labeler, StrategyKind};
use crate::consistency::{consistency, consistency_2d};
use crate::embed::{check_rows, embed, Point};
use crate::hypothesis::{AnalysisParams, HypothesisSpec, Space, Verdict};
use crate::svg;
use crate::{Result, VerifyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub hypothesis: String,
    pub task: TaskKind,
    pub t: usize,
    pub addr: usize,
    pub label: String,
    pub strategy: Option<StrategyKind>,
    pub count: usize,
    pub excluded: usize,
    pub distinct_labels: usize,
    /// The score the verdict is based on.
    pub score: f64,
    pub chance: f64,
    pub verdict: Verdict,
    pub original_score: f64,
    pub embedded_score: f64,
    pub analysis: AnalysisParams,
    pub samples: Vec<usize>,
    pub labels: Vec<String>,
    pub points: Vec<Point>,
}

impl VerificationReport {
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Scatter plot of the embedding, one colour per label.
    pub fn scatter_svg(&self) -> String {
        let title = format!(
            "{}: ({}, {}) = {} | score {:.3}, chance {:.3}, {}",
            self.hypothesis, self.t, self.addr, self.label, self.score, self.chance, self.verdict
        );
        svg::scatter(&self.points, &self.labels, &title)
    }
}

/// Standardizes every dimension to zero mean and unit variance; constant
/// dimensions become zero.
pub fn zscore(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len() as f64;
    let d = vectors.first().map_or(0, Vec::len);
    let mut out = vectors.to_vec();
    for j in 0..d {
        let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n;
        let var = vectors.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for v in &mut out {
            v[j] = if sd > 0.0 { (v[j] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Embeds and scores an already labelled cell set.
pub fn verify_cells(set: &LabeledCellSet, spec: &HypothesisSpec) -> Result<VerificationReport> {
    check_rows(&set.vectors)?;
    let params = &spec.analysis;
    let vectors = if params.zscore { zscore(&set.vectors) } else { set.vectors.clone() };
    let original = consistency(&vectors, &set.labels, params.k)?;
    let points = embed(&vectors, params.method, &params.tsne, params.seed)?;
    let embedded = consistency_2d(&points, &set.labels, params.k)?;
    let score = match params.space {
        Space::Original => original.score,
        Space::Embedding => embedded.score,
    };
    Ok(VerificationReport {
        hypothesis: spec.name.clone(),
        task: spec.task,
        t: set.meta.t,
        addr: set.meta.addr,
        label: spec.label.clone(),
        strategy: spec.strategy,
        count: set.len(),
        excluded: set.excluded,
        distinct_labels: set.distinct_labels(),
        score,
        chance: original.chance,
        verdict: params.thresholds.verdict(score, original.chance),
        original_score: original.score,
        embedded_score: embedded.score,
        analysis: params.clone(),
        samples: set.samples.clone(),
        labels: set.labels.clone(),
        points,
    })
}

/// Collects and labels the hypothesised cell from recorded traces.
pub fn labeled_cells(traces: &TraceSet, probes: &Dataset, spec: &HypothesisSpec) -> Result<LabeledCellSet> {
    if probes.task() != spec.task || traces.header.task != spec.task {
        return Err(VerifyError::Hypothesis(format!(
            "hypothesis is about {} but probes are {} and traces are {}",
            spec.task,
            probes.task(),
            traces.header.task
        )));
    }
    if traces.traces.len() != probes.len() {
        return Err(VerifyError::LabelCount(traces.traces.len(), probes.len()));
    }
    let labeler = Labeler {
        expr: spec.label_expr()?,
        strategy: spec.strategy,
        cells: traces.header.memory_cells,
        tann_start: spec.tann_start,
    };
    let cells = collect(&traces.traces, spec.t, spec.addr)?;
    let description = format!("{}: ({}, {}) = {}", spec.name, spec.t, spec.addr, spec.label);
    label(cells, probes, &labeler, spec.t, spec.addr, &description)
}

pub fn verify_traces(traces: &TraceSet, probes: &Dataset, spec: &HypothesisSpec) -> Result<VerificationReport> {
    verify_cells(&labeled_cells(traces, probes, spec)?, spec)
}

/// Records full traces of `model` over `probes` and verifies `spec`.
pub fn verify<T: Scalar>(model: &Model<T>, probes: &Dataset, spec: &HypothesisSpec) -> Result<VerificationReport> {
    let traces = record(model, probes, TraceLevel::Full)?;
    verify_traces(&traces, probes, spec)
}
