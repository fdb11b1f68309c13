//! Two-dimensional embeddings: exact t-SNE and PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Result, VerifyError};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsne,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and low momentum.
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
        }
    }
}

pub(crate) fn check_rows(vectors: &[Vec<f64>]) -> Result<usize> {
    let d = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != d) {
        return Err(VerifyError::Ragged);
    }
    Ok(d)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn embed(vectors: &[Vec<f64>], method: Method, params: &TsneParams, seed: u64) -> Result<Vec<Point>> {
    match method {
        Method::Tsne => tsne(vectors, params, seed),
        Method::Pca => pca(vectors),
    }
}

/// Projection onto the top two principal directions. Each direction's sign
/// is fixed so that its largest-magnitude component is positive.
pub fn pca(vectors: &[Vec<f64>]) -> Result<Vec<Point>> {
    if vectors.len() < 3 {
        return Err(VerifyError::TooFewPoints { need: 3, got: vectors.len() });
    }
    let d = check_rows(vectors)?;
    let n = vectors.len();
    let mut x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    for j in 0..d {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::with_capacity(2);
    for &c in order.iter().take(2) {
        let mut v = eig.eigenvectors.column(c).into_owned();
        let lead = (0..d).fold(0, |best, j| if v[j].abs() > v[best].abs() { j } else { best });
        if v[lead] < 0.0 {
            v = -v;
        }
        axes.push(v);
    }
    Ok((0..n)
        .map(|i| {
            let row = x.row(i);
            let coord = |a: usize| axes.get(a).map_or(0.0, |v| row.dot(&v.transpose()));
            [coord(0), coord(1)]
        })
        .collect())
}

/// Row-conditional affinities with per-row precision found by bisection so
/// that each row's entropy matches `ln(perplexity)`.
fn conditional_affinities(dist: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let n = dist.len();
    let target = perplexity.ln();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
        let min_d = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            for (j, pj) in p[i].iter_mut().enumerate() {
                *pj = if j == i { 0.0 } else { (-(dist[i][j] - min_d) * beta).exp() };
                sum += *pj;
            }
            let mut entropy = 0.0;
            for pj in p[i].iter_mut() {
                *pj /= sum;
                if *pj > 0.0 {
                    entropy -= *pj * pj.ln();
                }
            }
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
    }
    p
}

/// Exact (O(n²) per iteration) t-SNE with momentum and adaptive gains.
pub fn tsne(vectors: &[Vec<f64>], params: &TsneParams, seed: u64) -> Result<Vec<Point>> {
    let n = vectors.len();
    if n < 3 {
        return Err(VerifyError::TooFewPoints { need: 3, got: n });
    }
    if params.perplexity * 3.0 >= n as f64 {
        return Err(VerifyError::Perplexity { perplexity: params.perplexity, count: n });
    }
    check_rows(vectors)?;
    let dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sq_dist(&vectors[i], &vectors[j])).collect()).collect();
    if dist.iter().flatten().all(|&x| x == 0.0) {
        return Err(VerifyError::Degenerate);
    }
    let cond = conditional_affinities(&dist, params.perplexity);
    let p: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12)).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<Point> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![vec![0.0; n]; n];

    for iter in 0..params.iterations {
        let early = iter < params.exaggeration_iterations;
        let exaggeration = if early { params.early_exaggeration } else { 1.0 };
        let momentum = if early { 0.5 } else { 0.8 };
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let q = 1.0 / (1.0 + sq_dist(&y[i], &y[j]));
                num[i][j] = q;
                num[j][i] = q;
                total += 2.0 * q;
            }
        }
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[i][j] / total).max(1e-12);
                let coeff = 4.0 * (exaggeration * p[i][j] - q) * num[i][j];
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for c in 0..2 {
                let same_sign = (grad[c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { (gains[i][c] * 0.8).max(0.01) } else { gains[i][c] + 0.2 };
                update[i][c] = momentum * update[i][c] - params.learning_rate * gains[i][c] * grad[c];
            }
        }
        for i in 0..n {
            y[i][0] += update[i][0];
            y[i][1] += update[i][1];
        }
        let mean = y.iter().fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
        for pt in &mut y {
            pt[0] -= mean[0] / n as f64;
            pt[1] -= mean[1] / n as f64;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perplexity_calibration_hits_target_entropy() {
        let pts: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.91).cos()]).collect();
        let dist: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| sq_dist(a, b)).collect()).collect();
        for row in conditional_affinities(&dist, 10.0) {
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            assert!((h.exp() - 10.0).abs() < 1e-3, "{}", h.exp());
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_of_identical_vectors_is_zero() {
        let pts = vec![vec![1.0, 2.0, 3.0]; 5];
        assert!(pca(&pts).unwrap().iter().all(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12));
        assert!(matches!(
            tsne(&pts, &TsneParams { perplexity: 1.0, ..Default::default() }, 0),
            Err(VerifyError::Degenerate)
        ));
    }

    #[test]
    fn tsne_preconditions() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert!(matches!(tsne(&pts, &TsneParams::default(), 0), Err(VerifyError::Perplexity { .. })));
        assert!(matches!(tsne(&pts[..2], &TsneParams::default(), 0), Err(VerifyError::TooFewPoints { .. })));
        assert!(matches!(pca(&[vec![1.0], vec![1.0, 2.0], vec![0.0]]), Err(VerifyError::Ragged)));
    }
}
