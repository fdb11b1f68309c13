//! Controller cells: the LSTM and the simple tanh RNN baseline.
//!
//! The LSTM keeps one combined weight matrix of shape `(in + hid) × 4·hid`
//! whose column blocks are the input, forget and output gates and the
//! candidate, in that order.

use mann_tensor::{Array2, Scalar, Tape, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

/// Tape handles of the post-sigmoid gate activations of one step.
#[derive(Debug, Clone, Copy)]
pub struct GateVars {
    pub input: Var,
    pub forget: Var,
    pub output: Var,
}

/// Gate activations of one sample at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
}

impl GateRecord {
    pub fn from_tape<T: Scalar>(tape: &Tape<T>, gates: &GateVars, row: usize) -> Self {
        let take = |v: Var| tape.value(v).row(row).iter().map(|x| x.as_f64()).collect();
        Self { input_gate: take(gates.input), forget_gate: take(gates.forget), output_gate: take(gates.output) }
    }
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-bound..=bound)))
}

/// Uniform `[-b, b]` weights with `b = 1/sqrt(fan)`.
pub fn init_weight<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, fan: usize, rng: &mut R) -> Array2<T> {
    uniform(rows, cols, 1.0 / (fan.max(1) as f64).sqrt(), rng)
}

/// LSTM weight and bias: weights uniform in `±1/sqrt(hidden)`, forget bias 1, other biases 0.
pub fn lstm_init<T: Scalar, R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> (Array2<T>, Array2<T>) {
    (init_weight(input + hidden, 4 * hidden, hidden, rng), lstm_bias(hidden))
}

/// `1 × 4·hidden` bias with the forget block at 1.
pub fn lstm_bias<T: Scalar>(hidden: usize) -> Array2<T> {
    let mut bias = Array2::zeros((1, 4 * hidden));
    bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(T::one());
    bias
}

/// SimpRNN input weight, recurrent weight and bias.
pub fn simprnn_init<T: Scalar, R: Rng + ?Sized>(
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    (init_weight(input, hidden, hidden, rng), init_weight(hidden, hidden, hidden, rng), Array2::zeros((1, hidden)))
}

fn expect_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(CoreError::Dimension { what, expected, got })
    }
}

/// One LSTM step on a batch: `x` is `B × in`, `state.h`/`state.c` are `B × hid`.
pub fn lstm_step<T: Scalar>(
    tape: &mut Tape<T>,
    weight: Var,
    bias: Var,
    x: Var,
    state: &LstmState,
) -> Result<(LstmState, GateVars)> {
    let [_, hid] = tape.shape(state.h);
    let [rows, cols] = tape.shape(weight);
    expect_dim("lstm weight columns", 4 * hid, cols)?;
    expect_dim("lstm input", rows - hid.min(rows), tape.shape(x)[1])?;
    expect_dim("lstm bias", 4 * hid, tape.shape(bias)[1])?;

    let joined = tape.concat(&[x, state.h])?;
    let pre = tape.matmul(joined, weight)?;
    let pre = tape.add(pre, bias)?;
    let block = |tape: &mut Tape<T>, k: usize| tape.slice_cols(pre, k * hid, hid);
    let (zi, zf, zo, zg) = (block(tape, 0)?, block(tape, 1)?, block(tape, 2)?, block(tape, 3)?);
    let input = tape.sigmoid(zi)?;
    let forget = tape.sigmoid(zf)?;
    let output = tape.sigmoid(zo)?;
    let candidate = tape.tanh(zg)?;

    let kept = tape.mul(forget, state.c)?;
    let written = tape.mul(input, candidate)?;
    let c = tape.add(kept, written)?;
    let squashed = tape.tanh(c)?;
    let h = tape.mul(output, squashed)?;
    Ok((LstmState { h, c }, GateVars { input, forget, output }))
}

/// `h' = tanh(x W_x + h W_h + b)`.
pub fn simprnn_step<T: Scalar>(tape: &mut Tape<T>, w_x: Var, w_h: Var, bias: Var, x: Var, h: Var) -> Result<Var> {
    let [_, hid] = tape.shape(h);
    expect_dim("simprnn input", tape.shape(w_x)[0], tape.shape(x)[1])?;
    expect_dim("simprnn hidden", tape.shape(w_h)[0], hid)?;
    let a = tape.matmul(x, w_x)?;
    let b = tape.matmul(h, w_h)?;
    let z = tape.add(a, b)?;
    let z = tape.add(z, bias)?;
    Ok(tape.tanh(z)?)
}
