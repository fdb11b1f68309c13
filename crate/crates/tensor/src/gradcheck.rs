//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward values, so it is independent
//! of the backward rules it is used to validate.

use ndarray::Array2;

use crate::{Result, Tape, Var};

/// Step used for central differences.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Denominator floor for [`relative_error`]. Entries whose true gradient is
/// below this magnitude are compared in absolute terms against the floor.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat element index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub analytic: Vec<Array2<f64>>,
    pub numeric: Vec<Array2<f64>>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central differences, perturbing every entry of every parameter.
pub fn check<F>(params: &[Array2<f64>], eps: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let params: Vec<Array2<f64>> = params.iter().map(|p| p.as_standard_layout().to_owned()).collect();
    let params = params.as_slice();
    let analytic = analytic_grads(params, &build)?;

    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0, analytic: Vec::new(), numeric: Vec::new() };
    for p in 0..params.len() {
        let mut grad = Array2::zeros(params[p].raw_dim());
        let len = params[p].len();
        for j in 0..len {
            let orig = params[p].as_slice().expect("standard layout")[j];
            work[p].as_slice_mut().expect("standard layout")[j] = orig + eps;
            let plus = forward_value(&work, &build)?;
            work[p].as_slice_mut().expect("standard layout")[j] = orig - eps;
            let minus = forward_value(&work, &build)?;
            work[p].as_slice_mut().expect("standard layout")[j] = orig;

            let n = (plus - minus) / (2.0 * eps);
            grad.as_slice_mut().expect("standard layout")[j] = n;
            let a = analytic[p].as_slice().expect("standard layout")[j];
            let err = relative_error(a, n);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst = Some((p, j));
            }
            report.checked += 1;
        }
        numeric.push(grad);
    }
    report.analytic = analytic;
    report.numeric = numeric;
    Ok(report)
}

fn analytic_grads<F>(params: &[Array2<f64>], build: &F) -> Result<Vec<Array2<f64>>>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = params.iter().map(|p| tape.param(p.clone())).collect::<Result<Vec<_>>>()?;
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    Ok(vars
        .iter()
        .zip(params)
        .map(|(&v, p)| tape.grad(v).cloned().unwrap_or_else(|| Array2::zeros(p.raw_dim())))
        .collect())
}

fn forward_value<F>(params: &[Array2<f64>], build: &F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = params.iter().map(|p| tape.param(p.clone())).collect::<Result<Vec<_>>>()?;
    let loss = build(&mut tape, &vars)?;
    Ok(tape.scalar(loss))
}
