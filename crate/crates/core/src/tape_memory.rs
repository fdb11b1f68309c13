//! Tape memory with content and location addressing.
//!
//! Addressing runs content lookup, interpolation with the previous weights,
//! a circular shift over offsets `-1, 0, +1`, and sharpening. Reading is the
//! weighted sum of cells; writing applies erase then add to every cell in
//! proportion to its write weight.

use mann_tensor::{Array2, Scalar, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Guard added to the product of norms in the cosine similarity.
pub const COSINE_EPS: f64 = 1e-8;

/// Number of shift offsets (`-1, 0, +1`).
pub const SHIFTS: usize = 3;

/// Squashed addressing parameters of one head for a batch.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    /// `B × d`
    pub key: Var,
    /// `B × 1`, non-negative
    pub beta: Var,
    /// `B × 1`, in `(0, 1)`
    pub gate: Var,
    /// `B × 3`, a distribution over offsets `-1, 0, +1`
    pub shift: Var,
    /// `B × 1`, at least 1
    pub gamma: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct HeadOutputs {
    pub read: HeadVars,
    pub write: HeadVars,
    pub erase: Var,
    pub add: Var,
}

/// Width of the raw head layer for cell dimension `d`: two addressing heads
/// of `d + 6` columns each, then erase and add vectors.
pub fn head_layer_width(cell_dim: usize) -> usize {
    2 * (cell_dim + 6) + 2 * cell_dim
}

fn addressing<T: Scalar>(tape: &mut Tape<T>, raw: Var, at: usize, d: usize) -> Result<HeadVars> {
    let key = tape.slice_cols(raw, at, d)?;
    let beta = tape.slice_cols(raw, at + d, 1)?;
    let beta = tape.softplus(beta)?;
    let gate = tape.slice_cols(raw, at + d + 1, 1)?;
    let gate = tape.sigmoid(gate)?;
    let shift = tape.slice_cols(raw, at + d + 2, SHIFTS)?;
    let shift = tape.softmax(shift)?;
    let gamma = tape.slice_cols(raw, at + d + 5, 1)?;
    let gamma = tape.softplus(gamma)?;
    let gamma = tape.affine(gamma, T::one(), T::one())?;
    Ok(HeadVars { key, beta, gate, shift, gamma })
}

/// Splits the raw `B × head_layer_width(d)` output into read and write heads.
pub fn split_heads<T: Scalar>(tape: &mut Tape<T>, raw: Var, cell_dim: usize) -> Result<HeadOutputs> {
    let width = tape.shape(raw)[1];
    if width != head_layer_width(cell_dim) {
        return Err(CoreError::Dimension { what: "tape head layer", expected: head_layer_width(cell_dim), got: width });
    }
    let read = addressing(tape, raw, 0, cell_dim)?;
    let write = addressing(tape, raw, cell_dim + 6, cell_dim)?;
    let base = 2 * (cell_dim + 6);
    let erase = tape.slice_cols(raw, base, cell_dim)?;
    let erase = tape.sigmoid(erase)?;
    let add = tape.slice_cols(raw, base + cell_dim, cell_dim)?;
    Ok(HeadOutputs { read, write, erase, add })
}

/// Content, interpolation, shift and sharpening; returns `B × N` weights.
pub fn address_cells<T: Scalar>(tape: &mut Tape<T>, cells: &[Var], prev: Var, head: &HeadVars) -> Result<Var> {
    let eps = T::lit(COSINE_EPS);
    let mut sims = Vec::with_capacity(cells.len());
    for &cell in cells {
        sims.push(tape.cosine_rows(head.key, cell, eps)?);
    }
    let sims = tape.concat(&sims)?;
    let scores = tape.mul(sims, head.beta)?;
    let content = tape.softmax(scores)?;
    let gated = tape.mul(head.gate, content)?;
    let keep = tape.one_minus(head.gate)?;
    let kept = tape.mul(keep, prev)?;
    let interpolated = tape.add(gated, kept)?;
    let shifted = tape.circular_conv(interpolated, head.shift)?;
    Ok(tape.power_normalize(shifted, head.gamma)?)
}

/// `r = Σ_i w[:, i] · M_i`.
pub fn read_cells<T: Scalar>(tape: &mut Tape<T>, cells: &[Var], w: Var) -> Result<Var> {
    let terms: Vec<(usize, Var)> = cells.iter().copied().enumerate().collect();
    Ok(tape.column_mix(w, &terms)?)
}

/// `M_i' = M_i ⊙ (1 - w_i e) + w_i a` for every cell.
pub fn write_cells<T: Scalar>(tape: &mut Tape<T>, cells: &[Var], w: Var, erase: Var, add: Var) -> Result<Vec<Var>> {
    cells.iter().enumerate().map(|(i, &cell)| Ok(tape.erase_add(cell, w, i, erase, add)?)).collect()
}

/// `Σ_i w[i] · i`.
pub fn expected_address(w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(i, &x)| i as f64 * x).sum()
}

/// Owned addressing parameters of one head for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub key: Vec<f64>,
    pub beta: f64,
    pub gate: f64,
    /// Weights of offsets `-1, 0, +1`.
    pub shift: [f64; SHIFTS],
    pub gamma: f64,
}

impl HeadParams {
    pub fn from_tape<T: Scalar>(tape: &Tape<T>, head: &HeadVars, row: usize) -> Self {
        let at = |v: Var, j: usize| tape.value(v)[[row, j]].as_f64();
        Self {
            key: tape.value(head.key).row(row).iter().map(|x| x.as_f64()).collect(),
            beta: at(head.beta, 0),
            gate: at(head.gate, 0),
            shift: [at(head.shift, 0), at(head.shift, 1), at(head.shift, 2)],
            gamma: at(head.gamma, 0),
        }
    }
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector")
}

/// Addressing for a single memory `m` (`N × d`).
pub fn address(m: &Array2<f64>, prev: &[f64], head: &HeadParams) -> Result<Vec<f64>> {
    let invalid = |reason: &str| CoreError::Config(format!("head parameters: {reason}"));
    if head.beta < 0.0 || !(0.0..=1.0).contains(&head.gate) || head.gamma < 1.0 {
        return Err(invalid("need beta >= 0, gate in [0, 1], gamma >= 1"));
    }
    if head.shift.iter().any(|&s| s < 0.0) || (head.shift.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid("shift weights must form a distribution"));
    }
    if prev.len() != m.nrows() || head.key.len() != m.ncols() {
        return Err(CoreError::Dimension { what: "address", expected: m.nrows(), got: prev.len() });
    }
    let mut tape = Tape::<f64>::new();
    let cells = m
        .rows()
        .into_iter()
        .map(|r| tape.constant(r.to_owned().insert_axis(ndarray::Axis(0))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let prev = tape.constant(row(prev))?;
    let vars = HeadVars {
        key: tape.constant(row(&head.key))?,
        beta: tape.constant(row(&[head.beta]))?,
        gate: tape.constant(row(&[head.gate]))?,
        shift: tape.constant(row(&head.shift))?,
        gamma: tape.constant(row(&[head.gamma]))?,
    };
    let w = address_cells(&mut tape, &cells, prev, &vars)?;
    Ok(tape.value(w).row(0).to_vec())
}

pub fn tape_read(m: &Array2<f64>, w: &[f64]) -> Vec<f64> {
    m.t().dot(&ndarray::ArrayView1::from(w)).to_vec()
}

pub fn tape_write(m: &Array2<f64>, w: &[f64], erase: &[f64], add: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(m.dim(), |(i, j)| m[[i, j]] * (1.0 - w[i] * erase[j]) + w[i] * add[j])
}
