//! Per-step traces and the averaged analyses built on them: gate
//! saturation, push/pop and read/write policy curves, and memory heatmaps.
//!
//! Trace files are JSON lines. The first line is a [`TraceHeader`]; every
//! following line is one [`StepTrace`] with its sample index.

use std::io::{BufRead, Write};

use mann_tasks::dataset::Dataset;
use mann_tasks::TaskKind;
use mann_tensor::{Array2, Scalar, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::config::{HeadKind, InputSpec, Variant};
use crate::eval::EVAL_BATCH;
use crate::model::{Model, RunOptions, StepVars};
use crate::recurrent::GateRecord;
use crate::stack_memory::{expected_pops, push_probability, PopAttribution};
use crate::tape_memory::{expected_address, HeadParams};
use crate::train::make_batch;
use crate::{CoreError, Result};

pub const TRACE_SCHEMA: &str = "mannlab-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Everything except memory snapshots.
    Light,
    /// Also the full memory after every step.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: usize,
    /// Symbol or role of the step input, e.g. `x_2`, `<EOS>`, `y_0`, `*`.
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<GateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_head: Option<HeadParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_head: Option<HeadParams>,
    pub readout: Vec<f64>,
    /// Memory cells after the step, row 0 first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub sample: usize,
    pub steps: Vec<StepTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub variant: Variant,
    pub task: TaskKind,
    pub level: TraceLevel,
    pub samples: usize,
    pub memory_cells: usize,
    pub max_pops: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub header: TraceHeader,
    pub traces: Vec<Trace>,
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    sample: usize,
    #[serde(flatten)]
    step: StepTrace,
}

fn input_label(data: &Dataset, sample: usize, t: usize) -> String {
    match data {
        Dataset::Mirror(s) => {
            let l = s[sample].len();
            match t {
                _ if t < l => format!("x_{t}"),
                _ if t == l => "<EOS>".to_string(),
                _ => format!("y_{}", t - l - 1),
            }
        }
        Dataset::M10ae(s) => s[sample].tokens[t].to_string(),
    }
}

fn row_of<T: Scalar>(tape: &Tape<T>, v: Var, i: usize) -> Vec<f64> {
    tape.value(v).row(i).iter().map(|x| x.as_f64()).collect()
}

fn step_trace<T: Scalar>(
    tape: &Tape<T>,
    vars: &StepVars,
    t: usize,
    i: usize,
    input: String,
    level: TraceLevel,
) -> StepTrace {
    StepTrace {
        t,
        input,
        gates: vars.gates.as_ref().map(|g| GateRecord::from_tape(tape, g, i)),
        policy: vars.policy.map(|p| row_of(tape, p, i)),
        read_weights: vars.read_weights.map(|w| row_of(tape, w, i)),
        write_weights: vars.write_weights.map(|w| row_of(tape, w, i)),
        read_head: vars.heads.as_ref().map(|h| HeadParams::from_tape(tape, &h.read, i)),
        write_head: vars.heads.as_ref().map(|h| HeadParams::from_tape(tape, &h.write, i)),
        readout: vars.readout.map_or_else(Vec::new, |r| row_of(tape, r, i)),
        memory: (level == TraceLevel::Full && !vars.memory.is_empty())
            .then(|| vars.memory.iter().map(|&c| row_of(tape, c, i)).collect()),
    }
}

/// Runs `model` over every sample of `data` and records one trace per sample.
pub fn record<T: Scalar>(model: &Model<T>, data: &Dataset, level: TraceLevel) -> Result<TraceSet> {
    let compatible = match data.task() {
        TaskKind::Mirror => {
            matches!(model.config.input, InputSpec::Vector { .. }) && model.config.head == HeadKind::Bits9
        }
        TaskKind::M10ae => {
            matches!(model.config.input, InputSpec::Embedding { .. }) && model.config.head == HeadKind::Class10
        }
    };
    if !compatible {
        return Err(CoreError::Trace(format!("model is not configured for the {} task", data.task())));
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..data.len() {
        let len = match data {
            Dataset::Mirror(s) => s[i].len(),
            Dataset::M10ae(s) => s[i].len(),
        };
        groups.entry(len).or_default().push(i);
    }
    let mut traces: Vec<Option<Trace>> = vec![None; data.len()];
    for ids in groups.values() {
        for chunk in ids.chunks(2 * EVAL_BATCH) {
            let batch: Batch<T> = make_batch(data, chunk)?;
            let pass = model.forward(&batch.unsupervised(), &RunOptions::default())?;
            for (row, &sample) in chunk.iter().enumerate() {
                let steps = pass
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(t, vars)| step_trace(&pass.tape, vars, t, row, input_label(data, sample, t), level))
                    .collect();
                traces[sample] = Some(Trace { sample, steps });
            }
        }
    }
    Ok(TraceSet {
        header: TraceHeader {
            schema: TRACE_SCHEMA.to_string(),
            version: TRACE_VERSION,
            variant: model.config.variant,
            task: data.task(),
            level,
            samples: data.len(),
            memory_cells: model.config.memory_cells,
            max_pops: model.config.max_pops,
        },
        traces: traces.into_iter().map(|t| t.expect("every sample traced")).collect(),
    })
}

impl TraceSet {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w)?;
        for trace in &self.traces {
            for step in &trace.steps {
                let line = TraceLine { sample: trace.sample, step: step.clone() };
                serde_json::to_writer(&mut w, &line)?;
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| CoreError::Trace("empty trace file".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.schema != TRACE_SCHEMA || header.version != TRACE_VERSION {
            return Err(CoreError::Trace(format!("unsupported schema {} v{}", header.schema, header.version)));
        }
        let mut traces: Vec<Trace> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let TraceLine { sample, step } = serde_json::from_str(&line)?;
            match traces.last_mut() {
                Some(t) if t.sample == sample => t.steps.push(step),
                _ => traces.push(Trace { sample, steps: vec![step] }),
            }
        }
        if traces.len() != header.samples {
            return Err(CoreError::Trace(format!(
                "header promises {} samples, found {}",
                header.samples,
                traces.len()
            )));
        }
        Ok(Self { header, traces })
    }
}

/// Common length of all traces, rejecting empty or misaligned sets.
fn aligned_len(traces: &[Trace]) -> Result<usize> {
    let len = traces.first().ok_or_else(|| CoreError::Trace("no traces".into()))?.steps.len();
    if traces.iter().any(|t| t.steps.len() != len) {
        return Err(CoreError::Trace("traces have different lengths".into()));
    }
    Ok(len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSaturation {
    /// Per step, fraction of (sample, unit) pairs below the low threshold.
    pub left: Vec<f64>,
    /// Per step, fraction above the high threshold.
    pub right: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub input: GateSaturation,
    pub forget: GateSaturation,
    pub output: GateSaturation,
}

/// Left/right saturation fractions of each gate per step, pooled over
/// samples and units.
pub fn saturation(traces: &[Trace], lo: f64, hi: f64) -> Result<Saturation> {
    let len = aligned_len(traces)?;
    let curve = |pick: fn(&GateRecord) -> &Vec<f64>| -> Result<GateSaturation> {
        let mut left = Vec::with_capacity(len);
        let mut right = Vec::with_capacity(len);
        for t in 0..len {
            let (mut below, mut above, mut total) = (0usize, 0usize, 0usize);
            for trace in traces {
                let gates =
                    trace.steps[t].gates.as_ref().ok_or_else(|| CoreError::Trace("trace has no LSTM gates".into()))?;
                for &g in pick(gates) {
                    below += usize::from(g < lo);
                    above += usize::from(g > hi);
                    total += 1;
                }
            }
            left.push(below as f64 / total.max(1) as f64);
            right.push(above as f64 / total.max(1) as f64);
        }
        Ok(GateSaturation { left, right })
    };
    Ok(Saturation {
        input: curve(|g| &g.input_gate)?,
        forget: curve(|g| &g.forget_gate)?,
        output: curve(|g| &g.output_gate)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyCurves {
    /// Mean push probability and expected pops per step.
    Stack { push: Vec<f64>, pops: Vec<f64> },
    /// Mean expected read and write address per step.
    Tape { read: Vec<f64>, write: Vec<f64> },
}

fn mean_per_step(traces: &[Trace], len: usize, f: impl Fn(&StepTrace) -> Result<f64>) -> Result<Vec<f64>> {
    (0..len)
        .map(|t| {
            let mut sum = 0.0;
            for trace in traces {
                sum += f(&trace.steps[t])?;
            }
            Ok(sum / traces.len() as f64)
        })
        .collect()
}

pub fn policy_curves(traces: &[Trace], max_pops: usize, attribution: PopAttribution) -> Result<PolicyCurves> {
    let len = aligned_len(traces)?;
    let all = |f: fn(&StepTrace) -> bool| traces.iter().all(|tr| tr.steps.iter().all(f));
    let missing = || CoreError::Trace("step without policy".into());
    if all(|s| s.policy.is_some() && s.read_weights.is_none()) {
        let push =
            mean_per_step(traces, len, |s| Ok(push_probability(s.policy.as_ref().ok_or_else(missing)?, max_pops)))?;
        let pops = mean_per_step(traces, len, |s| {
            Ok(expected_pops(s.policy.as_ref().ok_or_else(missing)?, max_pops, attribution))
        })?;
        Ok(PolicyCurves::Stack { push, pops })
    } else if all(|s| s.read_weights.is_some() && s.write_weights.is_some() && s.policy.is_none()) {
        let read = mean_per_step(traces, len, |s| Ok(expected_address(s.read_weights.as_ref().ok_or_else(missing)?)))?;
        let write =
            mean_per_step(traces, len, |s| Ok(expected_address(s.write_weights.as_ref().ok_or_else(missing)?)))?;
        Ok(PolicyCurves::Tape { read, write })
    } else {
        Err(CoreError::Trace("traces mix variants or carry no memory policy".into()))
    }
}

/// Per step, the `N × dims` mean of `|M|` over traces, keeping the first
/// `dims` entries of every cell.
pub fn memory_heatmap(traces: &[Trace], dims: usize) -> Result<Vec<Array2<f64>>> {
    let len = aligned_len(traces)?;
    (0..len)
        .map(|t| {
            let mut acc: Option<Array2<f64>> = None;
            for trace in traces {
                let mem = trace.steps[t]
                    .memory
                    .as_ref()
                    .ok_or_else(|| CoreError::Trace("heatmap needs full traces with memory snapshots".into()))?;
                let n = mem.len();
                let width = dims.min(mem.first().map_or(0, |c| c.len()));
                let a = acc.get_or_insert_with(|| Array2::zeros((n, width)));
                if a.nrows() != n {
                    return Err(CoreError::Trace("memory sizes differ between traces".into()));
                }
                for (i, cell) in mem.iter().enumerate() {
                    for j in 0..a.ncols() {
                        a[[i, j]] += cell[j].abs();
                    }
                }
            }
            let mut a = acc.expect("at least one trace");
            a /= traces.len() as f64;
            Ok(a)
        })
        .collect()
}

/// Writes `t,input,<columns...>` rows; input labels come from the first trace.
pub fn write_curves_csv<W: Write>(labels: &[String], columns: &[(&str, &[f64])], mut w: W) -> std::io::Result<()> {
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "t,input,{}", names.join(","))?;
    for (t, label) in labels.iter().enumerate() {
        let values: Vec<String> = columns.iter().map(|c| c.1[t].to_string()).collect();
        writeln!(w, "{t},{label},{}", values.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::recurrent::GateRecord;
    use mann_tasks::mirror::MirrorSample;

    fn bare(t: usize) -> StepTrace {
        StepTrace {
            t,
            input: format!("x_{t}"),
            gates: None,
            policy: None,
            read_weights: None,
            write_weights: None,
            read_head: None,
            write_head: None,
            readout: vec![],
            memory: None,
        }
    }

    fn with_gates(values: Vec<f64>) -> StepTrace {
        StepTrace {
            gates: Some(GateRecord { input_gate: values.clone(), forget_gate: values.clone(), output_gate: values }),
            ..bare(0)
        }
    }

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn mirror_probe(len: usize, count: usize) -> Dataset {
        Dataset::Mirror(
            (0..count)
                .map(|i| MirrorSample::new((0..len).map(|j| (i * 7 + j) as u16 % 9 + 1).collect()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn mirror_trace_covers_encode_eos_decode() {
        for variant in Variant::ALL {
            let model = Model::<f64>::new(ModelConfig::mirror(variant, 1)).unwrap();
            let light = record(&model, &mirror_probe(3, 4), TraceLevel::Light).unwrap();
            assert_eq!(light.traces.len(), 4);
            for tr in &light.traces {
                assert_eq!(tr.steps.len(), 7);
                assert!(tr.steps.iter().all(|s| s.memory.is_none()));
                assert_eq!(tr.steps[3].input, "<EOS>");
                assert_eq!(tr.steps[6].input, "y_2");
                let stack = tr.steps.iter().all(|s| s.policy.is_some());
                let tape = tr.steps.iter().all(|s| s.read_weights.is_some() && s.read_head.is_some());
                assert_eq!(stack, variant == Variant::Sann);
                assert_eq!(tape, variant == Variant::Tann);
                assert_eq!(tr.steps.iter().all(|s| s.gates.is_some()), variant != Variant::Simprnn);
            }
            let full = record(&model, &mirror_probe(3, 4), TraceLevel::Full).unwrap();
            let has_memory = full.traces[0].steps.iter().all(|s| s.memory.is_some());
            assert_eq!(has_memory, variant.has_memory());
        }
    }

    #[test]
    fn sann_cell_zero_is_the_readout() {
        let model = Model::<f64>::new(ModelConfig::mirror(Variant::Sann, 4)).unwrap();
        let set = record(&model, &mirror_probe(4, 3), TraceLevel::Full).unwrap();
        for tr in &set.traces {
            for s in &tr.steps {
                assert_eq!(s.memory.as_ref().unwrap()[0], s.readout);
            }
        }
    }

    #[test]
    fn incompatible_task_rejected() {
        let model = Model::<f64>::new(ModelConfig::m10ae(Variant::Sann, 10, 0)).unwrap();
        assert!(matches!(record(&model, &mirror_probe(2, 2), TraceLevel::Light), Err(CoreError::Trace(_))));
    }

    #[test]
    fn recording_is_deterministic_and_round_trips() {
        let model = Model::<f64>::new(ModelConfig::mirror(Variant::Tann, 2)).unwrap();
        let probes = mirror_probe(3, 5);
        let a = record(&model, &probes, TraceLevel::Full).unwrap();
        let b = record(&model, &probes, TraceLevel::Full).unwrap();
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut ta).unwrap();
        b.write_jsonl(&mut tb).unwrap();
        assert_eq!(ta, tb);
        let back = TraceSet::read_jsonl(ta.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn saturation_examples() {
        let half = vec![Trace { sample: 0, steps: vec![with_gates(vec![0.5; 10])] }];
        let s = saturation(&half, 0.1, 0.9).unwrap();
        assert_eq!((s.input.left[0], s.input.right[0]), (0.0, 0.0));

        let high = vec![Trace { sample: 0, steps: vec![with_gates(vec![0.95; 10])] }];
        assert_eq!(saturation(&high, 0.1, 0.9).unwrap().forget.right, vec![1.0]);

        // Ten samples with 3 of 10 units above 0.9 in each.
        let traces: Vec<Trace> = (0..10)
            .map(|i| {
                let g = (0..10).map(|u| if (u + i) % 10 < 3 { 0.97 } else { 0.4 }).collect();
                Trace { sample: i, steps: vec![with_gates(g)] }
            })
            .collect();
        let s = saturation(&traces, 0.1, 0.9).unwrap();
        assert!((s.output.right[0] - 0.3).abs() < 1e-12);
        assert_eq!(s.output.left[0], 0.0);
    }

    #[test]
    fn saturation_rejects_misaligned_traces() {
        let traces = vec![
            Trace { sample: 0, steps: vec![with_gates(vec![0.5])] },
            Trace { sample: 1, steps: vec![with_gates(vec![0.5]), with_gates(vec![0.5])] },
        ];
        assert!(saturation(&traces, 0.1, 0.9).is_err());
        assert!(saturation(&[], 0.1, 0.9).is_err());
    }

    #[test]
    fn forced_push_policy_curves() {
        let k = 4;
        let steps = (0..6).map(|t| StepTrace { policy: Some(one_hot(2 * k + 2, 0)), ..bare(t) }).collect();
        let curves = policy_curves(&[Trace { sample: 0, steps }], k, PopAttribution::default()).unwrap();
        assert_eq!(curves, PolicyCurves::Stack { push: vec![1.0; 6], pops: vec![0.0; 6] });
    }

    #[test]
    fn tape_addresses_follow_the_head() {
        let n = 20;
        let steps = (0..5)
            .map(|t| StepTrace {
                read_weights: Some(one_hot(n, 17)),
                write_weights: Some(one_hot(n, (17 + t) % n)),
                ..bare(t)
            })
            .collect();
        let PolicyCurves::Tape { write, read } =
            policy_curves(&[Trace { sample: 0, steps }], 4, PopAttribution::default()).unwrap()
        else {
            panic!("tape curves expected")
        };
        assert_eq!(write, vec![17.0, 18.0, 19.0, 0.0, 1.0]);
        assert_eq!(read, vec![17.0; 5]);
    }

    #[test]
    fn mixed_variants_rejected() {
        let stack = Trace { sample: 0, steps: vec![StepTrace { policy: Some(one_hot(10, 0)), ..bare(0) }] };
        let tape = Trace {
            sample: 1,
            steps: vec![StepTrace { read_weights: Some(one_hot(3, 0)), write_weights: Some(one_hot(3, 0)), ..bare(0) }],
        };
        assert!(policy_curves(&[stack, tape], 4, PopAttribution::default()).is_err());
    }

    #[test]
    fn heatmap_examples() {
        let zero = Trace { sample: 0, steps: vec![StepTrace { memory: Some(vec![vec![0.0; 5]; 4]), ..bare(0) }] };
        let h = memory_heatmap(std::slice::from_ref(&zero), 3).unwrap();
        assert_eq!(h[0], Array2::<f64>::zeros((4, 3)));

        let mem = vec![vec![1.0, -2.0, 3.0, 4.0], vec![-0.5, 0.0, 0.25, 9.0]];
        let one = Trace { sample: 0, steps: vec![StepTrace { memory: Some(mem), ..bare(0) }] };
        let h = memory_heatmap(&[one], 3).unwrap();
        assert_eq!(h[0], ndarray::array![[1.0, 2.0, 3.0], [0.5, 0.0, 0.25]]);

        let light = Trace { sample: 0, steps: vec![bare(0)] };
        assert!(memory_heatmap(&[light], 3).is_err());
    }

    #[test]
    fn curves_csv_layout() {
        let mut out = Vec::new();
        write_curves_csv(&["x_0".into(), "<EOS>".into()], &[("push", &[1.0, 0.5]), ("pops", &[0.0, 2.0])], &mut out)
            .unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,input,push,pops\n0,x_0,1,0\n1,<EOS>,0.5,2\n");
    }
}
