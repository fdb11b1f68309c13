//! k-nearest-neighbour label consistency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{check_rows, sq_dist};
use crate::{Result, VerifyError};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// Fraction of points whose neighbourhood majority matches their label.
    pub score: f64,
    /// Frequency of the most common label.
    pub chance: f64,
    pub k: usize,
    pub count: usize,
}

/// Neighbours are ranked by Euclidean distance with ties broken by index.
/// A tied majority vote goes to whichever tied label occurs first in that
/// ranking.
pub fn consistency<L: Ord + Clone>(vectors: &[Vec<f64>], labels: &[L], k: usize) -> Result<Consistency> {
    let n = vectors.len();
    if n != labels.len() {
        return Err(VerifyError::LabelCount(n, labels.len()));
    }
    if k == 0 || n < k + 1 {
        return Err(VerifyError::TooFewPoints { need: k.max(1) + 1, got: n });
    }
    check_rows(vectors)?;
    let mut freq: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        *freq.entry(l).or_default() += 1;
    }
    if freq.len() < 2 {
        return Err(VerifyError::Untestable);
    }
    let chance = *freq.values().max().expect("nonempty") as f64 / n as f64;

    let mut hits = 0;
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        ranked.clear();
        ranked.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(&vectors[i], &vectors[j]), j)));
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbours = &ranked[..k];
        let mut votes: BTreeMap<&L, usize> = BTreeMap::new();
        for &(_, j) in neighbours {
            *votes.entry(&labels[j]).or_default() += 1;
        }
        let top = *votes.values().max().expect("k > 0");
        let winner = neighbours
            .iter()
            .map(|&(_, j)| &labels[j])
            .find(|l| votes[l] == top)
            .expect("some label reaches the maximum");
        if *winner == labels[i] {
            hits += 1;
        }
    }
    Ok(Consistency { score: hits as f64 / n as f64, chance, k, count: n })
}

/// Consistency of 2-D embedding points.
pub fn consistency_2d<L: Ord + Clone>(points: &[[f64; 2]], labels: &[L], k: usize) -> Result<Consistency> {
    let vectors: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    consistency(&vectors, labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clusters_score_one() {
        let mut v = Vec::new();
        let mut l = Vec::new();
        for c in 0..3 {
            for i in 0..10 {
                v.push(vec![c as f64 * 100.0 + i as f64 * 0.01, 0.0]);
                l.push(c);
            }
        }
        let r = consistency(&v, &l, 5).unwrap();
        assert_eq!(r.score, 1.0);
        assert!((r.chance - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let v: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert!(matches!(consistency(&v, &[1; 10], 5), Err(VerifyError::Untestable)));
        assert!(matches!(consistency(&v[..5], &[0, 1, 0, 1, 0], 5), Err(VerifyError::TooFewPoints { .. })));
        assert!(matches!(consistency(&v, &[0, 1], 5), Err(VerifyError::LabelCount(10, 2))));
    }

    #[test]
    fn vote_ties_go_to_the_nearest_label() {
        // Ties at k = 2 resolve to the nearer neighbour's label; only point 2 is a hit.
        let v = vec![vec![0.0], vec![1.0], vec![-2.0], vec![50.0], vec![60.0]];
        let l = ["a", "b", "a", "b", "a"];
        let r = consistency(&v, &l, 2).unwrap();
        assert!((r.score - 0.2).abs() < 1e-12, "{}", r.score);
    }

    #[test]
    fn distance_ties_break_by_index() {
        let v = vec![vec![0.0], vec![1.0], vec![-1.0], vec![10.0]];
        let l = [0, 1, 0, 1];
        // Point 0 is equidistant from 1 and 2; the lower index wins.
        let r = consistency(&v, &l, 1).unwrap();
        assert_eq!(r.score, 0.5);
    }
}
