//! The unified controller-plus-memory network.
//!
//! At step `t` the controller sees `i_t = [x_t, r_{t-1}]` and produces `h_t`.
//! The memory is then written and read, giving `r_t`, and the output layer
//! sees `o_t = [h_t, r_t]`. The stack policy looks at the previous memory and
//! `x_t`; its write pushes a linear map of `h_t`. The tape writes first,
//! addressed on the previous memory, and then reads the updated memory. The
//! baselines use the same path with a zero-width readout.

use mann_tensor::{Array2, Scalar, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::batch::{Batch, StepInput, Target};
use crate::config::{HeadKind, InitialMemory, InitialReadout, InputSpec, ModelConfig, Variant, INITIAL_TAPE_VALUE};
use crate::params::{Bound, ParamStore};
use crate::recurrent::{init_weight, lstm_bias, lstm_step, simprnn_step, GateVars, LstmState};
use crate::stack_memory::{self, action_count, Action, PolicyVars};
use crate::tape_memory::{self, head_layer_width, HeadOutputs};
use crate::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

/// Shapes of every parameter a configuration needs.
pub fn param_shapes(config: &ModelConfig) -> Vec<(String, [usize; 2])> {
    let h = config.controller_dim;
    let d = config.cell_dim;
    let n = config.memory_cells;
    let x = config.input.width();
    let r = config.readout_dim();
    let mut shapes = Vec::new();
    let mut add = |name: &str, shape: [usize; 2]| shapes.push((name.to_string(), shape));
    if let InputSpec::Embedding { vocab, dim } = config.input {
        add("embedding", [vocab, dim]);
    }
    match config.variant {
        Variant::Simprnn => {
            add("rnn.w_x", [x, h]);
            add("rnn.w_h", [h, h]);
            add("rnn.bias", [1, h]);
        }
        _ => {
            add("lstm.weight", [x + r + h, 4 * h]);
            add("lstm.bias", [1, 4 * h]);
        }
    }
    match config.variant {
        Variant::Sann => {
            let a = action_count(config.max_pops);
            add("stack.push", [h, d]);
            add("stack.push_bias", [1, d]);
            add("stack.conv", [2 * d, 2]);
            add("stack.w_am", [2 * (n - 1), a]);
            add("stack.w_ax", [x, a]);
            add("stack.bias", [1, a]);
        }
        Variant::Tann => {
            add("tape.head", [h, head_layer_width(d)]);
            add("tape.head_bias", [1, head_layer_width(d)]);
            if config.initial_memory == InitialMemory::Learned {
                add("tape.init", [n, d]);
            }
        }
        Variant::Lstm | Variant::Simprnn => {}
    }
    add("out.weight", [h + r, config.head.width()]);
    add("out.bias", [1, config.head.width()]);
    shapes
}

impl<T: Scalar> Model<T> {
    /// A freshly initialized model; the result depends only on the config.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.controller_dim;
        let mut params = ParamStore::new();
        for (name, [rows, cols]) in param_shapes(&config) {
            let value = match name.as_str() {
                "lstm.weight" | "rnn.w_x" | "rnn.w_h" => init_weight(rows, cols, h, &mut rng),
                "lstm.bias" => lstm_bias(h),
                "embedding" => init_weight(rows, cols, 1, &mut rng),
                "tape.init" => Array2::from_elem((rows, cols), T::lit(INITIAL_TAPE_VALUE)),
                _ if name.ends_with("bias") => Array2::zeros((rows, cols)),
                _ => init_weight(rows, cols, rows, &mut rng),
            };
            params.insert(name, value);
        }
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking they match the config.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let shapes = param_shapes(&config);
        if shapes.len() != params.len() {
            return Err(CoreError::Checkpoint(format!("expected {} parameters, found {}", shapes.len(), params.len())));
        }
        for (name, [r, c]) in shapes {
            match params.get(&name) {
                Some(a) if a.dim() == (r, c) => {}
                Some(a) => {
                    return Err(CoreError::Checkpoint(format!(
                        "parameter `{name}` has shape {:?}, expected [{r}, {c}]",
                        a.shape()
                    )))
                }
                None => return Err(CoreError::Checkpoint(format!("missing parameter `{name}`"))),
            }
        }
        Ok(Self { config, params })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model { config: self.config.clone(), params: self.params.cast() }
    }

    pub fn session(&self, batch: usize) -> Result<Session<'_, T>> {
        Session::new(self, batch)
    }

    /// Unrolls the model over `batch` and builds the loss for its target.
    pub fn forward(&self, batch: &Batch<T>, options: &RunOptions) -> Result<ForwardPass<T>> {
        if batch.steps() == 0 {
            return Err(CoreError::EmptySequence);
        }
        let b = batch.size();
        let mut session = self.session(b)?;
        let mut state = session.initial_state()?;
        let wanted = batch.output_steps();
        let mut steps = Vec::with_capacity(batch.steps());
        let mut logits = Vec::with_capacity(wanted.len());
        for (t, input) in batch.inputs.iter().enumerate() {
            let (next, vars) = session.step(input, &state, options)?;
            if wanted.binary_search(&t).is_ok() {
                logits.push((t, session.output_logits(vars.output)?));
            }
            state = next;
            steps.push(vars);
        }
        let loss = session.loss(&batch.target, &logits)?;
        let Session { tape, bound, .. } = session;
        Ok(ForwardPass { tape, bound, steps, logits, loss })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replaces the stack policy with this action at every step.
    pub forced_action: Option<Action>,
}

#[derive(Debug, Clone)]
pub enum MemoryState {
    None,
    Stack { cells: Vec<Var> },
    Tape { cells: Vec<Var>, read: Var, write: Var },
}

impl MemoryState {
    pub fn cells(&self) -> &[Var] {
        match self {
            MemoryState::None => &[],
            MemoryState::Stack { cells } | MemoryState::Tape { cells, .. } => cells,
        }
    }
}

/// Recurrent state between steps. `c` is absent for the SimpRNN controller
/// and `readout` for the memoryless variants.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub h: Var,
    pub c: Option<Var>,
    pub memory: MemoryState,
    pub readout: Option<Var>,
}

/// Every tensor of one step, as recorded on the tape.
#[derive(Debug, Clone)]
pub struct StepVars {
    pub gates: Option<GateVars>,
    pub hidden: Var,
    /// Stack action distribution.
    pub policy: Option<Var>,
    /// Tape head parameters.
    pub heads: Option<HeadOutputs>,
    pub read_weights: Option<Var>,
    pub write_weights: Option<Var>,
    pub readout: Option<Var>,
    /// Memory cells after this step's write.
    pub memory: Vec<Var>,
    /// `o_t = [h_t, r_t]`.
    pub output: Var,
}

#[derive(Debug, Clone, Copy)]
struct Vars {
    embedding: Option<Var>,
    controller: Controller,
    stack: Option<(Var, Var, PolicyVars)>,
    tape_head: Option<(Var, Var)>,
    tape_init: Option<Var>,
    out: (Var, Var),
}

#[derive(Debug, Clone, Copy)]
enum Controller {
    Lstm { weight: Var, bias: Var },
    Simprnn { w_x: Var, w_h: Var, bias: Var },
}

/// One tape's worth of unrolling for a fixed batch size.
pub struct Session<'m, T: Scalar> {
    model: &'m Model<T>,
    pub tape: Tape<T>,
    pub bound: Bound,
    vars: Vars,
    batch: usize,
}

impl<'m, T: Scalar> Session<'m, T> {
    pub fn new(model: &'m Model<T>, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(CoreError::EmptySequence);
        }
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape)?;
        let controller = match model.config.variant {
            Variant::Simprnn => Controller::Simprnn {
                w_x: bound.get("rnn.w_x")?,
                w_h: bound.get("rnn.w_h")?,
                bias: bound.get("rnn.bias")?,
            },
            _ => Controller::Lstm { weight: bound.get("lstm.weight")?, bias: bound.get("lstm.bias")? },
        };
        let stack = match model.config.variant {
            Variant::Sann => Some((
                bound.get("stack.push")?,
                bound.get("stack.push_bias")?,
                PolicyVars {
                    conv: bound.get("stack.conv")?,
                    w_am: bound.get("stack.w_am")?,
                    w_ax: bound.get("stack.w_ax")?,
                    bias: bound.get("stack.bias")?,
                },
            )),
            _ => None,
        };
        let tape_head = match model.config.variant {
            Variant::Tann => Some((bound.get("tape.head")?, bound.get("tape.head_bias")?)),
            _ => None,
        };
        let vars = Vars {
            embedding: bound.maybe("embedding"),
            controller,
            stack,
            tape_head,
            tape_init: bound.maybe("tape.init"),
            out: (bound.get("out.weight")?, bound.get("out.bias")?),
        };
        Ok(Self { model, tape, bound, vars, batch })
    }

    fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    fn one_hot(&mut self, width: usize, at: usize) -> Result<Var> {
        let mut a = Array2::zeros((self.batch, width));
        a.column_mut(at).fill(T::one());
        Ok(self.tape.constant(a)?)
    }

    pub fn initial_state(&mut self) -> Result<ModelState> {
        let cfg = self.config().clone();
        let (b, h, n, d) = (self.batch, cfg.controller_dim, cfg.memory_cells, cfg.cell_dim);
        let hidden = self.tape.zeros(b, h);
        let c = match cfg.variant {
            Variant::Simprnn => None,
            _ => Some(self.tape.zeros(b, h)),
        };
        let memory = match cfg.variant {
            Variant::Sann => MemoryState::Stack { cells: (0..n).map(|_| self.tape.zeros(b, d)).collect() },
            Variant::Tann => {
                let cells = match self.vars.tape_init {
                    Some(init) => (0..n)
                        .map(|i| self.tape.gather_rows(init, &vec![i; b]))
                        .collect::<std::result::Result<Vec<_>, _>>()?,
                    None => (0..n)
                        .map(|_| self.tape.constant(Array2::from_elem((b, d), T::lit(INITIAL_TAPE_VALUE))))
                        .collect::<std::result::Result<Vec<_>, _>>()?,
                };
                MemoryState::Tape { cells, read: self.one_hot(n, 0)?, write: self.one_hot(n, 0)? }
            }
            Variant::Lstm | Variant::Simprnn => MemoryState::None,
        };
        let readout = match (&memory, cfg.initial_readout) {
            (MemoryState::None, _) => None,
            (_, InitialReadout::Zeros) => Some(self.tape.zeros(b, d)),
            (MemoryState::Stack { cells }, InitialReadout::MemoryRead) => Some(cells[0]),
            (MemoryState::Tape { cells, read, .. }, InitialReadout::MemoryRead) => {
                Some(tape_memory::read_cells(&mut self.tape, cells, *read)?)
            }
        };
        Ok(ModelState { h: hidden, c, memory, readout })
    }

    /// `x_t` for the batch: dense rows or embedding lookups.
    pub fn embed(&mut self, input: &StepInput<T>) -> Result<Var> {
        let width = self.config().input.width();
        let x = match (input, self.vars.embedding) {
            (StepInput::Dense(a), None) => self.tape.constant(a.clone())?,
            (StepInput::Tokens(t), Some(table)) => self.tape.gather_rows(table, t)?,
            _ => return Err(CoreError::Config("input kind does not match the model's input spec".into())),
        };
        let [rows, cols] = self.tape.shape(x);
        if rows != self.batch {
            return Err(CoreError::Dimension { what: "batch size", expected: self.batch, got: rows });
        }
        if cols != width {
            return Err(CoreError::Dimension { what: "input width", expected: width, got: cols });
        }
        Ok(x)
    }

    pub fn step(
        &mut self,
        input: &StepInput<T>,
        state: &ModelState,
        options: &RunOptions,
    ) -> Result<(ModelState, StepVars)> {
        let x = self.embed(input)?;
        let controller_in = match state.readout {
            Some(r) => self.tape.concat(&[x, r])?,
            None => x,
        };
        let (hidden, c, gates) = match self.vars.controller {
            Controller::Lstm { weight, bias } => {
                let prev = LstmState {
                    h: state.h,
                    c: state.c.ok_or_else(|| CoreError::Config("LSTM state without cell".into()))?,
                };
                let (next, gates) = lstm_step(&mut self.tape, weight, bias, controller_in, &prev)?;
                (next.h, Some(next.c), Some(gates))
            }
            Controller::Simprnn { w_x, w_h, bias } => {
                let h = simprnn_step(&mut self.tape, w_x, w_h, bias, controller_in, state.h)?;
                (h, None, None)
            }
        };

        let mut vars = StepVars {
            gates,
            hidden,
            policy: None,
            heads: None,
            read_weights: None,
            write_weights: None,
            readout: None,
            memory: Vec::new(),
            output: hidden,
        };
        let memory = match &state.memory {
            MemoryState::None => MemoryState::None,
            MemoryState::Stack { cells } => {
                let (push_w, push_b, policy_vars) = self.vars.stack.expect("stack variant binds stack params");
                let k = self.config().max_pops;
                let p = match options.forced_action {
                    Some(action) => self.one_hot(action_count(k), action.index(k))?,
                    None => stack_memory::action_policy(&mut self.tape, cells, x, &policy_vars)?,
                };
                let v = self.tape.matmul(hidden, push_w)?;
                let v = self.tape.add(v, push_b)?;
                let next = stack_memory::write_cells(&mut self.tape, cells, p, v, k)?;
                vars.policy = Some(p);
                vars.readout = Some(next[0]);
                MemoryState::Stack { cells: next }
            }
            MemoryState::Tape { cells, read, write } => {
                let (w, b) = self.vars.tape_head.expect("tape variant binds head params");
                let raw = self.tape.matmul(hidden, w)?;
                let raw = self.tape.add(raw, b)?;
                let d = self.config().cell_dim;
                let heads = tape_memory::split_heads(&mut self.tape, raw, d)?;
                let ww = tape_memory::address_cells(&mut self.tape, cells, *write, &heads.write)?;
                let next = tape_memory::write_cells(&mut self.tape, cells, ww, heads.erase, heads.add)?;
                let wr = tape_memory::address_cells(&mut self.tape, &next, *read, &heads.read)?;
                let r = tape_memory::read_cells(&mut self.tape, &next, wr)?;
                vars.heads = Some(heads);
                vars.read_weights = Some(wr);
                vars.write_weights = Some(ww);
                vars.readout = Some(r);
                MemoryState::Tape { cells: next, read: wr, write: ww }
            }
        };
        vars.memory = memory.cells().to_vec();
        if let Some(r) = vars.readout {
            vars.output = self.tape.concat(&[hidden, r])?;
        }
        let next = ModelState { h: hidden, c, memory, readout: vars.readout };
        Ok((next, vars))
    }

    /// Output-layer logits for `o_t`.
    pub fn output_logits(&mut self, output: Var) -> Result<Var> {
        let (w, b) = self.vars.out;
        let z = self.tape.matmul(output, w)?;
        Ok(self.tape.add(z, b)?)
    }

    /// Mirror: bit cross-entropy summed over bits, averaged over items and
    /// decode steps. M10AE: class cross-entropy at each item's last step,
    /// averaged over items. Zero for unsupervised batches.
    pub fn loss(&mut self, target: &Target<T>, logits: &[(usize, Var)]) -> Result<Var> {
        let b = self.batch;
        let mut parts = Vec::new();
        match target {
            Target::Bits { bits, .. } => {
                if self.config().head != HeadKind::Bits9 {
                    return Err(CoreError::Config("bit targets need the bits9 head".into()));
                }
                let scale = T::lit(1.0 / (b * bits.len()) as f64);
                for (&(_, z), y) in logits.iter().zip(bits) {
                    parts.push(self.tape.bce_with_logits(z, y, scale)?);
                }
            }
            Target::Class { last, labels } => {
                if self.config().head != HeadKind::Class10 {
                    return Err(CoreError::Config("class targets need the class10 head".into()));
                }
                let share = T::lit(1.0 / b as f64);
                for &(t, z) in logits {
                    let weights: Vec<T> = last.iter().map(|&l| if l == t { share } else { T::zero() }).collect();
                    parts.push(self.tape.cross_entropy(z, labels, &weights)?);
                }
            }
            Target::None => {}
        }
        let mut total = match parts.first() {
            Some(&p) => p,
            None => self.tape.zeros(1, 1),
        };
        for &p in parts.iter().skip(1) {
            total = self.tape.add(total, p)?;
        }
        Ok(total)
    }
}

/// The recorded unroll of one batch.
pub struct ForwardPass<T: Scalar> {
    pub tape: Tape<T>,
    pub bound: Bound,
    pub steps: Vec<StepVars>,
    /// Output logits at the steps where outputs are read.
    pub logits: Vec<(usize, Var)>,
    pub loss: Var,
}

/// A model's answer for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    /// Mirror output words, in output order.
    Words(Vec<u16>),
    Class(u8),
}

impl<T: Scalar> ForwardPass<T> {
    pub fn loss_value(&self) -> f64 {
        self.tape.scalar(self.loss).as_f64()
    }

    /// Thresholded bits at every output step (mirror) or the arg-max class at
    /// each item's last step (M10AE).
    pub fn predictions(&self, target: &Target<T>) -> Vec<Prediction> {
        match target {
            Target::Class { last, .. } => last
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let (_, z) = self.logits.iter().find(|(s, _)| *s == t).expect("logits at every last step");
                    let row = self.tape.value(*z).row(i);
                    let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                    Prediction::Class(best as u8)
                })
                .collect(),
            Target::Bits { .. } | Target::None => {
                let b = self.logits.first().map_or(0, |&(_, z)| self.tape.shape(z)[0]);
                (0..b)
                    .map(|i| {
                        let words = self
                            .logits
                            .iter()
                            .map(|&(_, z)| {
                                let row = self.tape.value(z).row(i);
                                row.iter()
                                    .take(9)
                                    .enumerate()
                                    .fold(0u16, |w, (j, &v)| w | (u16::from(v > T::zero()) << j))
                            })
                            .collect();
                        Prediction::Words(words)
                    })
                    .collect()
            }
        }
    }
}
