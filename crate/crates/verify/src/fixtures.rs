//! Synthetic inputs with known cluster structure.

use std::collections::{BTreeMap, BTreeSet};

use mann_core::config::Variant;
use mann_core::introspect::{StepTrace, Trace, TraceHeader, TraceLevel, TraceSet, TRACE_SCHEMA, TRACE_VERSION};
use mann_tasks::dataset::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cells::{input_symbol, StrategyKind};
use crate::Result;
use mann_tasks::strategy::CellContent;

/// `blobs` isotropic Gaussian clusters of `per_blob` points each. Centres sit
/// on distinct axes scaled so every pair is `separation` apart.
pub fn gaussian_blobs(
    blobs: usize,
    per_blob: usize,
    dim: usize,
    sigma: f64,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<String>) {
    assert!(blobs <= dim, "one axis per blob centre");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let scale = separation / std::f64::consts::SQRT_2;
    let mut vectors = Vec::with_capacity(blobs * per_blob);
    let mut labels = Vec::with_capacity(blobs * per_blob);
    for b in 0..blobs {
        for _ in 0..per_blob {
            let mut v: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
            v[b] += scale;
            vectors.push(v);
            labels.push(format!("blob{b}"));
        }
    }
    (vectors, labels)
}

pub fn permuted(labels: &[String], seed: u64) -> Vec<String> {
    let mut out = labels.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

fn render(content: CellContent, data: &Dataset, sample: usize) -> Option<String> {
    match content {
        CellContent::Input(i) => input_symbol(data, sample, i),
        other => Some(other.to_string()),
    }
}

/// Traces whose memory cells are exactly what `strategy` asserts: each
/// asserted cell holds a fixed random embedding of its label plus
/// N(0, sigma²) noise, every other cell holds noise alone.
pub fn synthetic_traces(
    probes: &Dataset,
    strategy: StrategyKind,
    memory_cells: usize,
    cell_dim: usize,
    sigma: f64,
    seed: u64,
    tann_start: usize,
) -> Result<TraceSet> {
    let oracle: Vec<_> =
        (0..probes.len()).map(|i| strategy.run(probes, i, memory_cells, tann_start)).collect::<Result<_>>()?;
    let mut names = BTreeSet::new();
    for (i, trace) in oracle.iter().enumerate() {
        for step in &trace.steps {
            names.extend(step.memory.values().filter_map(|&c| render(c, probes, i)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedding: BTreeMap<String, Vec<f64>> = names
        .into_iter()
        .map(|n| {
            let v = (0..cell_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (n, v)
        })
        .collect();
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let variant = match strategy {
        StrategyKind::TannMirror => Variant::Tann,
        StrategyKind::SannMirror | StrategyKind::SannM10ae => Variant::Sann,
    };
    let traces = oracle
        .iter()
        .enumerate()
        .map(|(sample, trace)| {
            let steps = trace
                .steps
                .iter()
                .enumerate()
                .map(|(t, step)| {
                    let memory: Vec<Vec<f64>> = (0..memory_cells)
                        .map(|addr| {
                            let base =
                                step.memory.get(&addr).and_then(|&c| render(c, probes, sample)).map(|n| &embedding[&n]);
                            (0..cell_dim).map(|j| base.map_or(0.0, |b| b[j]) + noise.sample(&mut rng)).collect()
                        })
                        .collect();
                    StepTrace {
                        t,
                        input: String::new(),
                        gates: None,
                        policy: None,
                        read_weights: None,
                        write_weights: None,
                        read_head: None,
                        write_head: None,
                        readout: if variant == Variant::Sann { memory[0].clone() } else { vec![0.0; cell_dim] },
                        memory: Some(memory),
                    }
                })
                .collect();
            Trace { sample, steps }
        })
        .collect();
    Ok(TraceSet {
        header: TraceHeader {
            schema: TRACE_SCHEMA.to_string(),
            version: TRACE_VERSION,
            variant,
            task: probes.task(),
            level: TraceLevel::Full,
            samples: probes.len(),
            memory_cells,
            max_pops: 4,
        },
        traces,
    })
}
