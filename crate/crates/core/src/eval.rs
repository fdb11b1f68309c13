//! Difficulty-bucketed accuracy.
//!
//! A mirror prediction is correct only if every output vector matches the
//! reversed input after thresholding at 0.5; an M10AE prediction is correct if
//! the arg-max class equals the label.

use std::collections::BTreeMap;
use std::io::Write;

use mann_tasks::dataset::Dataset;
use mann_tasks::m10ae::M10aeSample;
use mann_tasks::mirror::MirrorSample;
use mann_tensor::Scalar;
use serde::{Deserialize, Serialize};

use crate::batch::{m10ae_batch, mirror_batch, Batch};
use crate::model::{Model, Prediction, RunOptions};
use crate::{CoreError, Result};

/// Items per forward pass during evaluation.
pub const EVAL_BATCH: usize = 250;

/// Anything that answers task samples: trained models, oracles, stubs.
pub trait Predictor {
    fn predict_mirror(&self, samples: &[MirrorSample]) -> Result<Vec<Vec<u16>>>;
    fn predict_m10ae(&self, samples: &[M10aeSample]) -> Result<Vec<u8>>;
}

/// Mean loss and per-sample correctness of a model on (a prefix of) a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub loss: f64,
    pub correct: Vec<bool>,
}

impl Scored {
    pub fn accuracy(&self) -> f64 {
        if self.correct.is_empty() {
            return 0.0;
        }
        self.correct.iter().filter(|&&c| c).count() as f64 / self.correct.len() as f64
    }
}

/// Groups sample indices into batches of equal (mirror) or similar (M10AE)
/// length, preserving a deterministic order.
fn eval_groups(lengths: &[usize], exact: bool) -> Vec<Vec<usize>> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in lengths.iter().enumerate() {
        by_len.entry(l).or_default().push(i);
    }
    if exact {
        by_len.into_values().flat_map(|ids| ids.chunks(EVAL_BATCH).map(<[usize]>::to_vec).collect::<Vec<_>>()).collect()
    } else {
        let sorted: Vec<usize> = by_len.into_values().flatten().collect();
        sorted.chunks(EVAL_BATCH).map(<[usize]>::to_vec).collect()
    }
}

fn is_correct(sample_target: &[u16], prediction: &Prediction) -> bool {
    matches!(prediction, Prediction::Words(w) if w.as_slice() == sample_target)
}

impl<T: Scalar> Model<T> {
    fn run_groups<S, F>(&self, samples: &[S], groups: Vec<Vec<usize>>, build: F) -> Result<(f64, Vec<Prediction>)>
    where
        S: Clone,
        F: Fn(&[S]) -> Result<Batch<T>>,
    {
        let mut predictions: Vec<Option<Prediction>> = vec![None; samples.len()];
        let mut loss = 0.0;
        for ids in groups {
            let chunk: Vec<S> = ids.iter().map(|&i| samples[i].clone()).collect();
            let batch = build(&chunk)?;
            let pass = self.forward(&batch, &RunOptions::default())?;
            loss += pass.loss_value() * ids.len() as f64;
            for (&i, p) in ids.iter().zip(pass.predictions(&batch.target)) {
                predictions[i] = Some(p);
            }
        }
        let n = samples.len().max(1) as f64;
        Ok((loss / n, predictions.into_iter().map(|p| p.expect("every sample is grouped")).collect()))
    }

    /// Loss and correctness on the first `limit` samples of `data`.
    pub fn score(&self, data: &Dataset, limit: Option<usize>) -> Result<Scored> {
        let n = limit.map_or(data.len(), |l| l.min(data.len()));
        match data {
            Dataset::Mirror(all) => {
                let samples = &all[..n];
                let lengths: Vec<usize> = samples.iter().map(|s| s.len()).collect();
                let (loss, preds) = self.run_groups(samples, eval_groups(&lengths, true), mirror_batch)?;
                let correct = samples.iter().zip(&preds).map(|(s, p)| is_correct(&s.target(), p)).collect();
                Ok(Scored { loss, correct })
            }
            Dataset::M10ae(all) => {
                let samples = &all[..n];
                let lengths: Vec<usize> = samples.iter().map(|s| s.len()).collect();
                let (loss, preds) = self.run_groups(samples, eval_groups(&lengths, false), m10ae_batch)?;
                let correct = samples.iter().zip(&preds).map(|(s, p)| *p == Prediction::Class(s.label)).collect();
                Ok(Scored { loss, correct })
            }
        }
    }
}

impl<T: Scalar> Predictor for Model<T> {
    fn predict_mirror(&self, samples: &[MirrorSample]) -> Result<Vec<Vec<u16>>> {
        let lengths: Vec<usize> = samples.iter().map(|s| s.len()).collect();
        let (_, preds) = self.run_groups(samples, eval_groups(&lengths, true), mirror_batch)?;
        Ok(preds
            .into_iter()
            .map(|p| match p {
                Prediction::Words(w) => w,
                Prediction::Class(_) => unreachable!("mirror batches yield words"),
            })
            .collect())
    }

    fn predict_m10ae(&self, samples: &[M10aeSample]) -> Result<Vec<u8>> {
        let lengths: Vec<usize> = samples.iter().map(|s| s.len()).collect();
        let (_, preds) = self.run_groups(samples, eval_groups(&lengths, false), m10ae_batch)?;
        Ok(preds
            .into_iter()
            .map(|p| match p {
                Prediction::Class(c) => c,
                Prediction::Words(_) => unreachable!("M10AE batches yield classes"),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketKey {
    /// Mirror sequence length, or M10AE token count.
    Length,
    /// Number of low-priority operators (M10AE only).
    NLpo,
}

impl BucketKey {
    pub fn of(self, data: &Dataset, i: usize) -> Result<usize> {
        match (self, data) {
            (BucketKey::Length, Dataset::Mirror(s)) => Ok(s[i].len()),
            (BucketKey::Length, Dataset::M10ae(s)) => Ok(s[i].len()),
            (BucketKey::NLpo, Dataset::M10ae(s)) => Ok(s[i].n_lpo),
            (BucketKey::NLpo, Dataset::Mirror(_)) => Err(CoreError::Config("mirror samples have no #LPO".into())),
        }
    }

    /// The conventional key for a task.
    pub fn default_for(data: &Dataset) -> Self {
        match data {
            Dataset::Mirror(_) => BucketKey::Length,
            Dataset::M10ae(_) => BucketKey::NLpo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    pub bucket: usize,
    pub count: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub key: BucketKey,
    pub buckets: Vec<BucketStat>,
    pub count: usize,
    pub accuracy: Option<f64>,
}

impl EvalReport {
    pub fn bucket(&self, b: usize) -> Option<&BucketStat> {
        self.buckets.iter().find(|s| s.bucket == b)
    }

    /// Pooled accuracy over buckets `lo..=hi`.
    pub fn accuracy_between(&self, lo: usize, hi: usize) -> Option<f64> {
        let (count, correct) = self
            .buckets
            .iter()
            .filter(|s| (lo..=hi).contains(&s.bucket))
            .fold((0, 0), |(n, c), s| (n + s.count, c + s.correct));
        (count > 0).then(|| correct as f64 / count as f64)
    }

    /// `bucket,count,accuracy` rows, then an `all` row; empty buckets report `null`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bucket,count,accuracy")?;
        let fmt = |a: Option<f64>| a.map_or("null".to_string(), |x| x.to_string());
        for s in &self.buckets {
            writeln!(w, "{},{},{}", s.bucket, s.count, fmt(s.accuracy))?;
        }
        writeln!(w, "all,{},{}", self.count, fmt(self.accuracy))
    }
}

/// Scores `predictor` on `data`, bucketing by `key` over the union of the
/// data's range and `bounds`.
pub fn evaluate<P: Predictor + ?Sized>(
    predictor: &P,
    data: &Dataset,
    key: BucketKey,
    bounds: Option<(usize, usize)>,
) -> Result<EvalReport> {
    let correct: Vec<bool> = match data {
        Dataset::Mirror(samples) => {
            predictor.predict_mirror(samples)?.iter().zip(samples).map(|(p, s)| *p == s.target()).collect()
        }
        Dataset::M10ae(samples) => {
            predictor.predict_m10ae(samples)?.iter().zip(samples).map(|(&p, s)| p == s.label).collect()
        }
    };
    report_from(data, key, bounds, &correct)
}

/// Buckets precomputed per-sample correctness.
pub fn report_from(
    data: &Dataset,
    key: BucketKey,
    bounds: Option<(usize, usize)>,
    correct: &[bool],
) -> Result<EvalReport> {
    let keys = (0..data.len()).map(|i| key.of(data, i)).collect::<Result<Vec<_>>>()?;
    let lo = keys.iter().copied().chain(bounds.map(|b| b.0)).min();
    let hi = keys.iter().copied().chain(bounds.map(|b| b.1)).max();
    let mut buckets: Vec<BucketStat> = match (lo, hi) {
        (Some(lo), Some(hi)) => {
            (lo..=hi).map(|bucket| BucketStat { bucket, count: 0, correct: 0, accuracy: None }).collect()
        }
        _ => Vec::new(),
    };
    let base = lo.unwrap_or(0);
    for (&k, &c) in keys.iter().zip(correct) {
        let s = &mut buckets[k - base];
        s.count += 1;
        s.correct += usize::from(c);
    }
    for s in &mut buckets {
        s.accuracy = (s.count > 0).then(|| s.correct as f64 / s.count as f64);
    }
    let total = correct.iter().filter(|&&c| c).count();
    Ok(EvalReport {
        key,
        buckets,
        count: data.len(),
        accuracy: (!data.is_empty()).then(|| total as f64 / data.len() as f64),
    })
}
