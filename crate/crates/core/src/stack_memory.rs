//! Differentiable stack memory.
//!
//! Row 0 of the `N × d` memory is the top of the stack. There are `2K + 2`
//! actions: `PUSH_k` pops `k` times then pushes the transformed controller
//! state, `STAY_k` only pops `k` times. Popping shifts rows up and fills the
//! bottom with zeros; pushing shifts rows down and drops the bottom row. The
//! differentiable write is the expectation of the memories produced by every
//! action under the policy.
//!
//! On the tape the memory is a list of `N` cell nodes, each `B × d`, and
//! action probabilities are a `B × (2K+2)` matrix with the `PUSH` block
//! first.

use mann_tensor::{Array2, Scalar, Tape, Var};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Push(usize),
    Stay(usize),
}

impl Action {
    /// Column of this action in a distribution over `2K + 2` actions.
    pub fn index(self, max_pops: usize) -> usize {
        match self {
            Action::Push(k) => k,
            Action::Stay(k) => max_pops + 1 + k,
        }
    }

    pub fn from_index(i: usize, max_pops: usize) -> Option<Action> {
        match i {
            _ if i <= max_pops => Some(Action::Push(i)),
            _ if i < action_count(max_pops) => Some(Action::Stay(i - max_pops - 1)),
            _ => None,
        }
    }

    pub fn pops(self) -> usize {
        match self {
            Action::Push(k) | Action::Stay(k) => k,
        }
    }
}

pub fn action_count(max_pops: usize) -> usize {
    2 * max_pops + 2
}

/// Which actions count toward the expected number of pops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopAttribution {
    /// Both `PUSH_k` and `STAY_k` pop `k` times.
    #[default]
    PushAndStay,
    StayOnly,
}

pub fn stack_readout<T: Scalar>(m: &Array2<T>) -> Array1<T> {
    m.row(0).to_owned()
}

/// The memory after executing `action` with push value `v`.
pub fn apply_action<T: Scalar>(m: &Array2<T>, action: Action, v: &[T]) -> Array2<T> {
    let (n, d) = m.dim();
    assert_eq!(v.len(), d, "push value has the cell dimension");
    let k = action.pops();
    let popped = |i: usize| (i + k < n).then(|| m.row(i + k));
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let src = match action {
            Action::Stay(_) => popped(i),
            Action::Push(_) if i == 0 => {
                out.row_mut(0).assign(&ndarray::ArrayView1::from(v));
                continue;
            }
            Action::Push(_) => popped(i - 1),
        };
        if let Some(row) = src {
            out.row_mut(i).assign(&row);
        }
    }
    out
}

fn check_distribution<T: Scalar>(p: &[T], max_pops: usize) -> Result<()> {
    if p.len() != action_count(max_pops) {
        return Err(CoreError::Dimension {
            what: "action distribution",
            expected: action_count(max_pops),
            got: p.len(),
        });
    }
    let total: f64 = p.iter().map(|x| x.as_f64()).sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < T::zero()) {
        return Err(CoreError::NotNormalized(total));
    }
    Ok(())
}

/// `Σ_a p(a) · apply_action(m, a, v)`.
pub fn stack_write<T: Scalar>(m: &Array2<T>, p: &[T], v: &[T], max_pops: usize) -> Result<Array2<T>> {
    check_distribution(p, max_pops)?;
    let mut out = Array2::zeros(m.raw_dim());
    for (i, &pa) in p.iter().enumerate() {
        let action = Action::from_index(i, max_pops).expect("length checked");
        out.scaled_add(pa, &apply_action(m, action, v));
    }
    Ok(out)
}

/// `Σ_k p(PUSH_k)`.
pub fn push_probability(p: &[f64], max_pops: usize) -> f64 {
    p[..=max_pops].iter().sum()
}

/// `Σ_k k · (p(PUSH_k) + p(STAY_k))`, or the `STAY_k` part only.
pub fn expected_pops(p: &[f64], max_pops: usize, attribution: PopAttribution) -> f64 {
    (0..=max_pops)
        .map(|k| {
            let push = match attribution {
                PopAttribution::PushAndStay => p[k],
                PopAttribution::StayOnly => 0.0,
            };
            k as f64 * (push + p[max_pops + 1 + k])
        })
        .sum()
}

/// Expected write on the tape. `cells[i]` is row `i` of every batch item,
/// `p` is `B × (2K+2)` and `v` the `B × d` push value.
pub fn write_cells<T: Scalar>(tape: &mut Tape<T>, cells: &[Var], p: Var, v: Var, max_pops: usize) -> Result<Vec<Var>> {
    let n = cells.len();
    let [_, width] = tape.shape(p);
    if width != action_count(max_pops) {
        return Err(CoreError::Dimension { what: "action distribution", expected: action_count(max_pops), got: width });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut terms = Vec::with_capacity(width);
        for k in 0..=max_pops {
            if i + k < n {
                terms.push((Action::Stay(k).index(max_pops), cells[i + k]));
            }
            if i == 0 {
                terms.push((Action::Push(k).index(max_pops), v));
            } else if i - 1 + k < n {
                terms.push((Action::Push(k).index(max_pops), cells[i - 1 + k]));
            }
        }
        out.push(tape.column_mix(p, &terms)?);
    }
    Ok(out)
}

/// Bound policy parameters: a `2d × 2` convolution kernel (rows `0..d` see
/// cell `j`, rows `d..2d` see cell `j+1`), `W_aM` of shape `2(N-1) × A`,
/// `W_ax` of shape `in × A` and bias `b_a`.
#[derive(Debug, Clone, Copy)]
pub struct PolicyVars {
    pub conv: Var,
    pub w_am: Var,
    pub w_ax: Var,
    pub bias: Var,
}

/// Action distribution `softmax(W_aM · flatten(conv(M)) + W_ax · x + b_a)`.
/// The convolution slides a size-2 window over the cells without padding and
/// has two output channels; position `j`, channel `c` is flattened to `2j + c`.
pub fn action_policy<T: Scalar>(tape: &mut Tape<T>, cells: &[Var], x: Var, params: &PolicyVars) -> Result<Var> {
    if cells.len() < 2 {
        return Err(CoreError::Config("stack policy needs at least 2 cells".into()));
    }
    let mut maps = Vec::with_capacity(cells.len() - 1);
    for pair in cells.windows(2) {
        let window = tape.concat(pair)?;
        maps.push(tape.matmul(window, params.conv)?);
    }
    let flat = tape.concat(&maps)?;
    let from_memory = tape.matmul(flat, params.w_am)?;
    let from_input = tape.matmul(x, params.w_ax)?;
    let logits = tape.add(from_memory, from_input)?;
    let logits = tape.add(logits, params.bias)?;
    Ok(tape.softmax(logits)?)
}

/// Owned policy parameters, for evaluating the policy outside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct StackPolicyParams {
    pub conv: Array2<f64>,
    pub w_am: Array2<f64>,
    pub w_ax: Array2<f64>,
    pub bias: Array2<f64>,
}

impl StackPolicyParams {
    pub fn zeros(cells: usize, cell_dim: usize, input_dim: usize, max_pops: usize) -> Self {
        let a = action_count(max_pops);
        Self {
            conv: Array2::zeros((2 * cell_dim, 2)),
            w_am: Array2::zeros((2 * cells.saturating_sub(1), a)),
            w_ax: Array2::zeros((input_dim, a)),
            bias: Array2::zeros((1, a)),
        }
    }

    /// The action distribution for one memory `m` (`N × d`) and input `x`.
    pub fn policy(&self, m: &Array2<f64>, x: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::<f64>::new();
        let cells = m
            .rows()
            .into_iter()
            .map(|r| tape.constant(r.to_owned().insert_axis(ndarray::Axis(0))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let x = tape.constant(Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector"))?;
        let params = PolicyVars {
            conv: tape.constant(self.conv.clone())?,
            w_am: tape.constant(self.w_am.clone())?,
            w_ax: tape.constant(self.w_ax.clone())?,
            bias: tape.constant(self.bias.clone())?,
        };
        let p = action_policy(&mut tape, &cells, x, &params)?;
        Ok(tape.value(p).row(0).to_vec())
    }
}
