//! SVG rendering for the `plot` subcommand.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mann_core::introspect::{memory_heatmap, policy_curves, saturation, write_curves_csv, PolicyCurves, TraceSet};
use mann_core::stack_memory::PopAttribution;
use mann_core::train::{read_metrics_csv, Split};
use mann_verify::svg::{heatmap, line_chart, LineChart, Series};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Train and dev accuracy against step, from `metrics.csv` files.
    Learning,
    /// Accuracy per difficulty bucket, from `eval.csv` files.
    Accuracy,
    /// Gate saturation per step, from a trace file.
    Saturation,
    /// Push/pop or read/write curves per step, from a trace file.
    Policy,
    /// Mean |memory| per step, from a full trace file.
    Heatmap,
}

/// Series name for an input: its parent directory, or the file stem.
fn series_name(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_traces(inputs: &[PathBuf]) -> Result<TraceSet, CliError> {
    let [path] = inputs else {
        return Err(CliError::config("this plot takes exactly one trace file"));
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let set = TraceSet::read_jsonl(std::io::BufReader::new(file))?;
    if set.traces.is_empty() {
        return Err(CliError::data(format!("{}: no traces", path.display())));
    }
    Ok(set)
}

fn some(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&x| Some(x)).collect()
}

/// Renders every file of a plot in memory; nothing is written on error.
pub fn render(kind: PlotKind, inputs: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    match kind {
        PlotKind::Learning => learning(inputs),
        PlotKind::Accuracy => accuracy(inputs),
        PlotKind::Saturation | PlotKind::Policy | PlotKind::Heatmap => {
            let set = read_traces(inputs)?;
            let labels: Vec<String> = set.traces[0].steps.iter().map(|s| s.input.clone()).collect();
            let xs: Vec<f64> = (0..labels.len()).map(|t| t as f64).collect();
            match kind {
                PlotKind::Saturation => saturation_plot(&set, &labels, &xs),
                PlotKind::Policy => policy_plot(&set, &labels, &xs),
                _ => heatmap_plot(&set),
            }
        }
    }
}

fn learning(inputs: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    let mut runs = Vec::new();
    for path in inputs {
        let rows = read_metrics_csv(&read(path)?).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if rows.is_empty() {
            return Err(CliError::data(format!("{}: metrics file has no rows", path.display())));
        }
        runs.push((series_name(path), rows));
    }
    let mut steps: Vec<usize> = runs.iter().flat_map(|(_, rows)| rows.iter().map(|r| r.step)).collect();
    steps.sort_unstable();
    steps.dedup();
    let xs: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (name, rows) in &runs {
        for split in [Split::Train, Split::Dev] {
            let v: Vec<Option<f64>> = steps
                .iter()
                .map(|&s| rows.iter().find(|r| r.step == s && r.split == split).map(|r| r.accuracy))
                .collect();
            names.push(format!("{name} {split}"));
            values.push(v);
        }
    }
    let series: Vec<Series> = names.iter().zip(&values).map(|(n, v)| Series { name: n, values: v }).collect();
    let svg = line_chart(&LineChart {
        title: "Learning curves",
        x_label: "step",
        y_label: "accuracy",
        xs: &xs,
        x_names: None,
        y_range: Some((0.0, 1.0)),
        series: &series,
    });
    Ok(vec![("learning.svg".into(), svg)])
}

/// Parses `bucket,count,accuracy` rows, skipping the `all` row.
fn read_eval_csv(text: &str, path: &Path) -> Result<Vec<(usize, Option<f64>)>, CliError> {
    let bad = || CliError::data(format!("{}: expected bucket,count,accuracy rows", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some("bucket,count,accuracy") {
        return Err(bad());
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty() && !l.starts_with("all,")) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let bucket = f[0].parse().map_err(|_| bad())?;
        let acc = match f[2] {
            "null" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        rows.push((bucket, acc));
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: evaluation file has no buckets", path.display())));
    }
    Ok(rows)
}

fn accuracy(inputs: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    let mut runs = Vec::new();
    for path in inputs {
        runs.push((series_name(path), read_eval_csv(&read(path)?, path)?));
    }
    let mut buckets: Vec<usize> = runs.iter().flat_map(|(_, r)| r.iter().map(|b| b.0)).collect();
    buckets.sort_unstable();
    buckets.dedup();
    let xs: Vec<f64> = buckets.iter().map(|&b| b as f64).collect();
    let values: Vec<Vec<Option<f64>>> = runs
        .iter()
        .map(|(_, rows)| buckets.iter().map(|b| rows.iter().find(|r| r.0 == *b).and_then(|r| r.1)).collect())
        .collect();
    let series: Vec<Series> = runs.iter().zip(&values).map(|((n, _), v)| Series { name: n, values: v }).collect();
    let svg = line_chart(&LineChart {
        title: "Accuracy by difficulty",
        x_label: "difficulty",
        y_label: "accuracy",
        xs: &xs,
        x_names: None,
        y_range: Some((0.0, 1.0)),
        series: &series,
    });
    Ok(vec![("accuracy.svg".into(), svg)])
}

fn saturation_plot(set: &TraceSet, labels: &[String], xs: &[f64]) -> Result<Vec<(String, String)>, CliError> {
    let s = saturation(&set.traces, 0.1, 0.9)?;
    let columns: [(&str, &[f64]); 6] = [
        ("input_left", &s.input.left),
        ("input_right", &s.input.right),
        ("forget_left", &s.forget.left),
        ("forget_right", &s.forget.right),
        ("output_left", &s.output.left),
        ("output_right", &s.output.right),
    ];
    let mut csv = Vec::new();
    write_curves_csv(labels, &columns, &mut csv)?;
    let values: Vec<Vec<Option<f64>>> = columns.iter().map(|c| some(c.1)).collect();
    let series: Vec<Series> = columns.iter().zip(&values).map(|(c, v)| Series { name: c.0, values: v }).collect();
    let svg = line_chart(&LineChart {
        title: "Gate saturation",
        x_label: "step input",
        y_label: "fraction saturated",
        xs,
        x_names: Some(labels),
        y_range: Some((0.0, 1.0)),
        series: &series,
    });
    Ok(vec![("saturation.svg".into(), svg), ("saturation.csv".into(), String::from_utf8(csv).expect("ascii csv"))])
}

fn policy_plot(set: &TraceSet, labels: &[String], xs: &[f64]) -> Result<Vec<(String, String)>, CliError> {
    let curves = policy_curves(&set.traces, set.header.max_pops, PopAttribution::default())?;
    let (title, y_label, columns): (&str, &str, [(&str, &[f64]); 2]) = match &curves {
        PolicyCurves::Stack { push, pops } => {
            ("Stack policy", "probability / expected pops", [("push", push), ("pops", pops)])
        }
        PolicyCurves::Tape { read, write } => {
            ("Tape addressing", "expected address", [("read", read), ("write", write)])
        }
    };
    let mut csv = Vec::new();
    write_curves_csv(labels, &columns, &mut csv)?;
    let values: Vec<Vec<Option<f64>>> = columns.iter().map(|c| some(c.1)).collect();
    let series: Vec<Series> = columns.iter().zip(&values).map(|(c, v)| Series { name: c.0, values: v }).collect();
    let svg = line_chart(&LineChart {
        title,
        x_label: "step input",
        y_label,
        xs,
        x_names: Some(labels),
        y_range: None,
        series: &series,
    });
    Ok(vec![("policy.svg".into(), svg), ("policy.csv".into(), String::from_utf8(csv).expect("ascii csv"))])
}

fn heatmap_plot(set: &TraceSet) -> Result<Vec<(String, String)>, CliError> {
    let maps = memory_heatmap(&set.traces, usize::MAX)?;
    Ok(maps
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
            let title = format!("Mean |memory| after step {t} ({})", set.traces[0].steps[t].input);
            (format!("heatmap_t{t:02}.svg"), heatmap(&rows, &title, "cell", "dimension"))
        })
        .collect())
}
