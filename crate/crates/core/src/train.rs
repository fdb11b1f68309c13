//! Mini-batch training with Adam, gradient clipping, dev-set model selection
//! and early stopping.
//!
//! Every training batch is drawn from one length group: an anchor sample is
//! picked uniformly and the batch is filled with samples of the anchor's
//! length. All randomness comes from the config seed.

use std::collections::BTreeMap;
use std::io::Write;

use mann_tasks::dataset::Dataset;
use mann_tensor::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{m10ae_batch, mirror_batch, Batch};
use crate::model::{Model, Prediction, RunOptions};
use crate::optim::{clip_global_norm, Adam};
use crate::params::ParamStore;
use crate::{CoreError, Result};

pub const GRID_BATCH_SIZES: [usize; 4] = [32, 64, 128, 256];
pub const GRID_LEARNING_RATES: [f64; 2] = [1e-3, 1e-4];

/// Train accuracy a run must reach to count as converged.
pub const CONVERGED_ACCURACY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub max_steps: usize,
    pub eval_every: usize,
    /// Evaluations without dev improvement before stopping.
    pub patience: Option<usize>,
    /// Stop as soon as dev accuracy reaches this value.
    pub stop_at_dev_accuracy: Option<f64>,
    /// Dev samples used for periodic evaluation (all if unset).
    pub dev_limit: Option<usize>,
    /// Non-finite steps tolerated before giving up.
    pub skip_budget: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 10.0,
            max_steps: 200_000,
            eval_every: 500,
            patience: None,
            stop_at_dev_accuracy: None,
            dev_limit: None,
            skip_budget: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.eval_every == 0
            || self.lr.is_nan()
            || self.lr <= 0.0
            || self.clip_norm.is_nan()
            || self.clip_norm <= 0.0
        {
            return Err(CoreError::Config("batch_size, eval_every, lr and clip_norm must be positive".into()));
        }
        Ok(())
    }

    /// Whether batch size and learning rate come from the standard search grid.
    pub fn on_search_grid(&self) -> bool {
        GRID_BATCH_SIZES.contains(&self.batch_size) && GRID_LEARNING_RATES.contains(&self.lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,split,loss,accuracy")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.step, r.split, r.loss, r.accuracy)?;
    }
    Ok(())
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let bad = |line: usize| CoreError::Config(format!("metrics line {line}: expected step,split,loss,accuracy"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "step,split,loss,accuracy")) => {}
        _ => return Err(bad(1)),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad(i + 1));
            }
            let split = match f[1] {
                "train" => Split::Train,
                "dev" => Split::Dev,
                _ => return Err(bad(i + 1)),
            };
            Ok(MetricRow {
                step: f[0].parse().map_err(|_| bad(i + 1))?,
                split,
                loss: f[2].parse().map_err(|_| bad(i + 1))?,
                accuracy: f[3].parse().map_err(|_| bad(i + 1))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    /// Ran to `max_steps`.
    Completed,
    /// Dev accuracy reached the stopping target.
    ReachedTarget,
    /// No dev improvement for `patience` evaluations.
    EarlyStopped,
    /// Too many non-finite steps; the model holds the last good checkpoint.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub status: TrainStatus,
    pub steps: usize,
    pub skipped_steps: usize,
    pub best_step: Option<usize>,
    pub best_dev_accuracy: Option<f64>,
    /// First evaluation step whose train-window accuracy reached [`CONVERGED_ACCURACY`].
    pub steps_to_converge: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub summary: TrainSummary,
    pub metrics: Vec<MetricRow>,
}

fn group_key(data: &Dataset, i: usize) -> usize {
    match data {
        Dataset::Mirror(s) => s[i].len(),
        Dataset::M10ae(s) => s[i].len(),
    }
}

/// Builds a batch from the given sample indices.
pub fn make_batch<T: Scalar>(data: &Dataset, ids: &[usize]) -> Result<Batch<T>> {
    match data {
        Dataset::Mirror(s) => mirror_batch(&ids.iter().map(|&i| s[i].clone()).collect::<Vec<_>>()),
        Dataset::M10ae(s) => m10ae_batch(&ids.iter().map(|&i| s[i].clone()).collect::<Vec<_>>()),
    }
}

fn batch_correct(data: &Dataset, ids: &[usize], preds: &[Prediction]) -> usize {
    ids.iter()
        .zip(preds)
        .filter(|(&i, p)| match (data, p) {
            (Dataset::Mirror(s), Prediction::Words(w)) => *w == s[i].target(),
            (Dataset::M10ae(s), Prediction::Class(c)) => *c == s[i].label,
            _ => false,
        })
        .count()
}

/// Deterministic same-length batch sampler.
pub struct Sampler {
    rng: ChaCha8Rng,
    groups: BTreeMap<usize, Vec<usize>>,
    keys: Vec<usize>,
}

impl Sampler {
    pub fn new(data: &Dataset, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(CoreError::EmptySequence);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let keys: Vec<usize> = (0..data.len()).map(|i| group_key(data, i)).collect();
        for (i, &k) in keys.iter().enumerate() {
            groups.entry(k).or_default().push(i);
        }
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(seed), groups, keys })
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let anchor = self.rng.random_range(0..self.keys.len());
        let group = &self.groups[&self.keys[anchor]];
        (0..size).map(|_| group[self.rng.random_range(0..group.len())]).collect()
    }
}

/// Trains `model` in place. On return the model holds the parameters with
/// the best dev accuracy seen (ties go to the lower dev loss).
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    cfg: &TrainConfig,
    train_set: &Dataset,
    dev_set: &Dataset,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.task() != dev_set.task() {
        return Err(CoreError::Config("train and dev sets are for different tasks".into()));
    }
    let mut sampler = Sampler::new(train_set, cfg.seed)?;
    let mut adam = Adam::new(&model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut metrics = Vec::new();
    let mut best: Option<(f64, f64, usize, ParamStore<T>)> = None;
    let mut last_good = model.params.clone();
    let mut skipped = 0;
    let mut stale_evals = 0;
    let mut steps_to_converge = None;
    let (mut window_loss, mut window_correct, mut window_seen, mut window_batches) = (0.0, 0usize, 0usize, 0usize);
    let mut status = TrainStatus::Completed;
    let mut step = 0;

    while step < cfg.max_steps {
        step += 1;
        let ids = sampler.next_batch(cfg.batch_size);
        let batch = make_batch::<T>(train_set, &ids)?;
        let mut pass = model.forward(&batch, &RunOptions::default())?;
        let loss = pass.loss_value();
        let mut ok = loss.is_finite();
        if ok {
            pass.tape.backward(pass.loss)?;
            let mut grads = model.params.grads(&pass.tape, &pass.bound);
            ok = grads.all_finite();
            if ok {
                clip_global_norm(&mut grads, cfg.clip_norm);
                adam.step(&mut model.params, &grads);
                ok = model.params.all_finite();
                if !ok {
                    model.params = last_good.clone();
                }
            }
        }
        if !ok {
            skipped += 1;
            if skipped > cfg.skip_budget {
                status = TrainStatus::Diverged;
                break;
            }
            continue;
        }
        window_loss += loss;
        window_batches += 1;
        window_correct += batch_correct(train_set, &ids, &pass.predictions(&batch.target));
        window_seen += ids.len();

        if step % cfg.eval_every == 0 {
            last_good = model.params.clone();
            let train_acc = window_correct as f64 / window_seen.max(1) as f64;
            metrics.push(MetricRow {
                step,
                split: Split::Train,
                loss: window_loss / window_batches.max(1) as f64,
                accuracy: train_acc,
            });
            (window_loss, window_correct, window_seen, window_batches) = (0.0, 0, 0, 0);
            if steps_to_converge.is_none() && train_acc >= CONVERGED_ACCURACY {
                steps_to_converge = Some(step);
            }
            let scored = model.score(dev_set, cfg.dev_limit)?;
            let dev_acc = scored.accuracy();
            metrics.push(MetricRow { step, split: Split::Dev, loss: scored.loss, accuracy: dev_acc });
            let improved = match &best {
                None => true,
                Some((acc, loss, _, _)) => dev_acc > *acc || (dev_acc == *acc && scored.loss < *loss),
            };
            if improved {
                best = Some((dev_acc, scored.loss, step, model.params.clone()));
                stale_evals = 0;
            } else {
                stale_evals += 1;
            }
            if cfg.stop_at_dev_accuracy.is_some_and(|target| dev_acc >= target) {
                status = TrainStatus::ReachedTarget;
                break;
            }
            if cfg.patience.is_some_and(|p| stale_evals >= p) {
                status = TrainStatus::EarlyStopped;
                break;
            }
        }
    }

    let (best_step, best_dev_accuracy) = match best {
        Some((acc, _, s, params)) => {
            model.params = params;
            (Some(s), Some(acc))
        }
        None => {
            if status == TrainStatus::Diverged {
                model.params = last_good;
            }
            (None, None)
        }
    };
    Ok(TrainOutcome {
        summary: TrainSummary {
            status,
            steps: step,
            skipped_steps: skipped,
            best_step,
            best_dev_accuracy,
            steps_to_converge,
        },
        metrics,
    })
}
