//! Collecting memory cells from traces and labelling them.

use std::fmt;
use std::str::FromStr;

use mann_core::introspect::Trace;
use mann_tasks::dataset::Dataset;
use mann_tasks::m10ae::{eval_m10ae, Token};
use mann_tasks::probe::{template_slot, word_digit};
use mann_tasks::strategy::{
    sann_m10ae_strategy, sann_mirror_strategy, tann_mirror_strategy, CellContent, StrategyTrace,
};
use serde::{Deserialize, Serialize};

use crate::{Result, VerifyError};

/// The cell vector at step `t` and address `addr` of every trace, in trace
/// order.
pub fn collect(traces: &[Trace], t: usize, addr: usize) -> Result<Vec<Vec<f64>>> {
    traces
        .iter()
        .map(|trace| {
            let step = trace.steps.get(t).ok_or(VerifyError::OutOfRange { t, addr })?;
            let memory = step.memory.as_ref().ok_or(VerifyError::NoMemory)?;
            memory.get(addr).cloned().ok_or(VerifyError::OutOfRange { t, addr })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SannMirror,
    TannMirror,
    SannM10ae,
}

impl StrategyKind {
    /// Runs the strategy oracle on one probe sample.
    pub fn run(self, data: &Dataset, sample: usize, cells: usize, tann_start: usize) -> Result<StrategyTrace> {
        Ok(match (self, data) {
            (StrategyKind::SannMirror, Dataset::Mirror(s)) => sann_mirror_strategy(&s[sample].input).1,
            (StrategyKind::TannMirror, Dataset::Mirror(s)) => {
                tann_mirror_strategy(&s[sample].input, cells, tann_start)?.1
            }
            (StrategyKind::SannM10ae, Dataset::M10ae(s)) => sann_m10ae_strategy(&s[sample].tokens)?.1,
            _ => {
                return Err(VerifyError::Hypothesis(format!("strategy {self} does not apply to {} data", data.task())))
            }
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::SannMirror => "sann_mirror",
            StrategyKind::TannMirror => "tann_mirror",
            StrategyKind::SannM10ae => "sann_m10ae",
        })
    }
}

/// What a cell is claimed to hold.
///
/// * `strategy`: whatever the strategy oracle asserts for the cell.
/// * `x_i`: input `i` of each sample.
/// * a contiguous span of M10AE template slots such as `N0 L0 N1`: the
///   value of that sub-expression, or `(value,op)` when the span ends with
///   an operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelExpr {
    Strategy,
    Input(usize),
    Span { start: usize, end: usize },
}

impl FromStr for LabelExpr {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || VerifyError::Hypothesis(format!("unrecognized label expression `{s}`"));
        if s == "strategy" {
            return Ok(LabelExpr::Strategy);
        }
        if let Some(i) = s.strip_prefix("x_") {
            return i.parse().map(LabelExpr::Input).map_err(|_| bad());
        }
        let slots = s
            .split(|c: char| c.is_whitespace() || c == '<' || c == '>' || c == '⟨' || c == '⟩')
            .filter(|p| !p.is_empty())
            .map(|p| template_slot(p).ok_or_else(bad))
            .collect::<Result<Vec<_>>>()?;
        let (&start, &end) = (slots.first().ok_or_else(bad)?, slots.last().ok_or_else(bad)?);
        let contiguous = slots.iter().enumerate().all(|(k, &p)| p == start + k);
        if !contiguous || start % 2 != 0 {
            return Err(VerifyError::Hypothesis(format!("`{s}` is not a span starting at a numeral")));
        }
        Ok(LabelExpr::Span { start, end })
    }
}

impl fmt::Display for LabelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelExpr::Strategy => f.write_str("strategy"),
            LabelExpr::Input(i) => write!(f, "x_{i}"),
            LabelExpr::Span { start, end } => {
                let names: Vec<&str> = (*start..=*end).map(|p| mann_tasks::probe::M10AE_TEMPLATE[p].0).collect();
                f.write_str(&names.join(" "))
            }
        }
    }
}

/// Rendering of input `i` of a sample: the probe digit for mirror digit
/// codes, the hex word for other mirror vectors, the token for M10AE.
pub fn input_symbol(data: &Dataset, sample: usize, i: usize) -> Option<String> {
    match data {
        Dataset::Mirror(s) => {
            s[sample].input.get(i).map(|&w| word_digit(w).map_or_else(|| format!("{w:03x}"), |d| d.to_string()))
        }
        Dataset::M10ae(s) => s[sample].tokens.get(i).map(Token::to_string),
    }
}

fn render(content: CellContent, data: &Dataset, sample: usize) -> Option<String> {
    match content {
        CellContent::Input(i) => input_symbol(data, sample, i),
        other => Some(other.to_string()),
    }
}

fn span_label(tokens: &[Token], start: usize, end: usize) -> Option<String> {
    let span = tokens.get(start..=end)?;
    match span.last()? {
        Token::Num(_) => eval_m10ae(span).ok().map(|v| v.to_string()),
        Token::Op(op) => {
            let value = eval_m10ae(&span[..span.len() - 1]).ok()?;
            Some(CellContent::Combination { value, op: *op }.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub t: usize,
    pub addr: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCellSet {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// Probe index of each kept vector.
    pub samples: Vec<usize>,
    /// Samples the hypothesis says nothing about.
    pub excluded: usize,
    pub meta: CellMeta,
}

impl LabeledCellSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn distinct_labels(&self) -> usize {
        self.labels.iter().collect::<std::collections::BTreeSet<_>>().len()
    }
}

/// How a hypothesis labels cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeler {
    pub expr: LabelExpr,
    pub strategy: Option<StrategyKind>,
    /// Tape size handed to the tape strategy.
    pub cells: usize,
    pub tann_start: usize,
}

impl Labeler {
    /// Label of cell `(t, addr)` for one probe sample, or `None` when the
    /// hypothesis asserts nothing there.
    pub fn label_of(&self, data: &Dataset, sample: usize, t: usize, addr: usize) -> Result<Option<String>> {
        match &self.expr {
            LabelExpr::Strategy => {
                let strategy =
                    self.strategy.ok_or_else(|| VerifyError::Hypothesis("label `strategy` needs a strategy".into()))?;
                let trace = strategy.run(data, sample, self.cells, self.tann_start)?;
                Ok(trace.cell_label(t, addr)?.and_then(|c| render(c, data, sample)))
            }
            LabelExpr::Input(i) => Ok(input_symbol(data, sample, *i)),
            LabelExpr::Span { start, end } => match data {
                Dataset::M10ae(s) => Ok(span_label(&s[sample].tokens, *start, *end)),
                Dataset::Mirror(_) => Err(VerifyError::Hypothesis("template spans apply to M10AE probes only".into())),
            },
        }
    }
}

/// Pairs collected cells with their labels, dropping unlabelled samples.
pub fn label(
    cells: Vec<Vec<f64>>,
    data: &Dataset,
    labeler: &Labeler,
    t: usize,
    addr: usize,
    description: &str,
) -> Result<LabeledCellSet> {
    if cells.len() != data.len() {
        return Err(VerifyError::LabelCount(cells.len(), data.len()));
    }
    let mut set = LabeledCellSet {
        vectors: Vec::new(),
        labels: Vec::new(),
        samples: Vec::new(),
        excluded: 0,
        meta: CellMeta { t, addr, description: description.to_string() },
    };
    for (sample, v) in cells.into_iter().enumerate() {
        match labeler.label_of(data, sample, t, addr)? {
            Some(l) => {
                set.vectors.push(v);
                set.labels.push(l);
                set.samples.push(sample);
            }
            None => set.excluded += 1,
        }
    }
    if set.is_empty() {
        return Err(VerifyError::Vacuous);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mann_tasks::m10ae::{parse, M10aeSample};
    use mann_tasks::mirror::MirrorSample;

    fn labeler(expr: &str, strategy: Option<StrategyKind>) -> Labeler {
        Labeler { expr: expr.parse().unwrap(), strategy, cells: 20, tann_start: 17 }
    }

    #[test]
    fn parse_expressions() {
        assert_eq!("strategy".parse::<LabelExpr>().unwrap(), LabelExpr::Strategy);
        assert_eq!("x_1".parse::<LabelExpr>().unwrap(), LabelExpr::Input(1));
        assert_eq!("⟨N0⟩⟨L0⟩⟨N1⟩".parse::<LabelExpr>().unwrap(), LabelExpr::Span { start: 0, end: 2 });
        assert_eq!("N1 H0".parse::<LabelExpr>().unwrap(), LabelExpr::Span { start: 2, end: 3 });
        assert_eq!(LabelExpr::Span { start: 0, end: 2 }.to_string(), "N0 L0 N1");
        for bad in ["x_a", "N0 N1", "L0 N1", "Q3", ""] {
            assert!(bad.parse::<LabelExpr>().is_err(), "{bad}");
        }
    }

    #[test]
    fn m10ae_span_labels() {
        let data = Dataset::M10ae(vec![M10aeSample::from_tokens(parse("8+6*3/2-4").unwrap()).unwrap()]);
        assert_eq!(labeler("N0 L0 N1", None).label_of(&data, 0, 2, 0).unwrap().as_deref(), Some("4"));
        assert_eq!(labeler("N1 H0", None).label_of(&data, 0, 3, 0).unwrap().as_deref(), Some("(6,*)"));
        assert_eq!(labeler("N0 L0 N1 H0 N2 H1 N3 L1 N4", None).label_of(&data, 0, 8, 0).unwrap().as_deref(), Some("4"));
    }

    #[test]
    fn strategy_labels_render_inputs_as_digits() {
        let data = Dataset::Mirror(vec![MirrorSample::new(vec![3, 7, 2]).unwrap()]);
        let l = labeler("strategy", Some(StrategyKind::SannMirror));
        assert_eq!(l.label_of(&data, 0, 1, 0).unwrap().as_deref(), Some("7"));
        assert_eq!(l.label_of(&data, 0, 1, 1).unwrap().as_deref(), Some("3"));
        assert_eq!(l.label_of(&data, 0, 1, 2).unwrap(), None);
        let set = label(vec![vec![0.0]], &data, &labeler("x_1", None), 1, 1, "").unwrap();
        assert_eq!(set.labels, vec!["7"]);
        assert!(matches!(label(vec![vec![0.0]], &data, &l, 1, 5, ""), Err(VerifyError::Vacuous)));
        let wrong_task = Labeler { strategy: Some(StrategyKind::SannM10ae), ..l };
        assert!(wrong_task.label_of(&data, 0, 0, 0).is_err());
    }
}
