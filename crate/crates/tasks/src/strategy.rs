//! Symbolic executors of hypothesized memory strategies.
//!
//! Each executor runs the hypothesized algorithm on concrete input and
//! records, for every unrolled step, what each memory cell is claimed to hold
//! after that step. Those claims become verification labels. Steps are
//! numbered from 0 and mirror inputs are named `x_0 .. x_{L-1}`; a mirror
//! trace covers the `2L + 1` steps the model unrolls (encode, delimiter,
//! decode).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::m10ae::{validate, Op, Token};
use crate::{Result, TaskError};

/// The writing address the tape hypothesis starts from in the reference run.
pub const DEFAULT_TANN_START: usize = 17;

/// What the hypothesis says a memory cell holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellContent {
    /// The input vector at this (0-based) position.
    Input(usize),
    /// A digit result.
    Value(u8),
    /// A pending high-priority operation: left operand and operator.
    Combination { value: u8, op: Op },
}

impl fmt::Display for CellContent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellContent::Input(i) => write!(f, "x_{i}"),
            CellContent::Value(v) => write!(f, "{v}"),
            CellContent::Combination { value, op } => write!(f, "({value},{op})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Registers {
    None,
    Tape {
        write: usize,
        read: Option<usize>,
    },
    /// In-controller storage of the arithmetic strategy: the low-priority
    /// result `l0`, its candidate `l0'`, the high-priority result `l1`, and
    /// the pending operators `p0`/`p1`.
    Arith {
        l0: u8,
        l0_candidate: u8,
        l1: u8,
        p0: Option<Op>,
        p1: Option<Op>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyStep {
    /// Cell address to content after this step; address 0 is the stack top.
    pub memory: BTreeMap<usize, CellContent>,
    pub output: Option<CellContent>,
    pub registers: Registers,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTrace {
    pub steps: Vec<StrategyStep>,
    /// Number of addressable cells, if bounded.
    pub cells: Option<usize>,
}

impl StrategyTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// What the hypothesis asserts for cell `addr` after step `t`, or `None`
    /// if it asserts nothing there.
    pub fn cell_label(&self, t: usize, addr: usize) -> Result<Option<CellContent>> {
        let oob = t >= self.steps.len() || self.cells.is_some_and(|n| addr >= n);
        if oob {
            return Err(TaskError::OutOfBounds {
                t,
                addr,
                steps: self.steps.len(),
                cells: self.cells.unwrap_or(usize::MAX),
            });
        }
        Ok(self.steps[t].memory.get(&addr).copied())
    }

    /// One line per step: `t`, memory cells, output, registers.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (t, step) in self.steps.iter().enumerate() {
            let mem: Vec<String> = step.memory.iter().map(|(a, c)| format!("{a}:{c}")).collect();
            let out = step.output.map_or("-".to_string(), |c| c.to_string());
            let regs = match &step.registers {
                Registers::None => "-".to_string(),
                Registers::Tape { write, read } => {
                    let read = read.map_or("-".to_string(), |r| r.to_string());
                    format!("w={write} r={read}")
                }
                Registers::Arith { l0, l0_candidate, l1, p0, p1 } => {
                    let op = |p: &Option<Op>| p.map_or("null".to_string(), |o| o.to_string());
                    format!("l0={l0} l0'={l0_candidate} l1={l1} p0={} p1={}", op(p0), op(p1))
                }
            };
            writeln!(w, "t={t}\tmem=[{}]\tout={out}\tregs={regs}", mem.join(","))?;
        }
        Ok(())
    }
}

/// Tape hypothesis for mirror: write inputs to consecutive cells starting at
/// `start`, then read them back walking downwards from the last one.
pub fn tann_mirror_strategy<S: Clone>(seq: &[S], n: usize, start: usize) -> Result<(Vec<S>, StrategyTrace)> {
    let len = seq.len();
    if len > n || n == 0 {
        return Err(TaskError::TooLong { len, capacity: n });
    }
    let mut memory = BTreeMap::new();
    let mut write = start % n;
    let mut read = None;
    let mut steps = Vec::with_capacity(2 * len + 1);
    let mut outputs = Vec::with_capacity(len);

    for i in 0..len {
        memory.insert(write, CellContent::Input(i));
        write = (write + 1) % n;
        steps.push(StrategyStep { memory: memory.clone(), output: None, registers: Registers::Tape { write, read } });
    }
    // Delimiter.
    let mut r = (start % n + len + n - 1) % n;
    read = Some(r);
    steps.push(StrategyStep { memory: memory.clone(), output: None, registers: Registers::Tape { write, read } });
    for _ in 0..len {
        let content = memory[&r];
        let CellContent::Input(i) = content else { unreachable!("only inputs are written") };
        outputs.push(seq[i].clone());
        r = (r + n - 1) % n;
        read = Some(r);
        steps.push(StrategyStep {
            memory: memory.clone(),
            output: Some(content),
            registers: Registers::Tape { write, read },
        });
    }
    Ok((outputs, StrategyTrace { steps, cells: Some(n) }))
}

fn stack_snapshot(stack: &[CellContent]) -> BTreeMap<usize, CellContent> {
    stack.iter().rev().copied().enumerate().collect()
}

/// Stack hypothesis for mirror: push every input, then output the top and
/// pop once per decode step.
pub fn sann_mirror_strategy<S: Clone>(seq: &[S]) -> (Vec<S>, StrategyTrace) {
    let len = seq.len();
    let mut stack: Vec<CellContent> = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(2 * len + 1);
    let mut outputs = Vec::with_capacity(len);
    for i in 0..len {
        stack.push(CellContent::Input(i));
        steps.push(StrategyStep { memory: stack_snapshot(&stack), output: None, registers: Registers::None });
    }
    steps.push(StrategyStep { memory: stack_snapshot(&stack), output: None, registers: Registers::None });
    for _ in 0..len {
        let top = stack.pop().expect("one pop per pushed input");
        let CellContent::Input(i) = top else { unreachable!("only inputs are pushed") };
        outputs.push(seq[i].clone());
        steps.push(StrategyStep { memory: stack_snapshot(&stack), output: Some(top), registers: Registers::None });
    }
    (outputs, StrategyTrace { steps, cells: None })
}

/// `f(a0, a1)`, or `a1` when there is no pending operator.
fn eval(f: Option<Op>, a0: u8, a1: u8) -> u8 {
    match f {
        Some(op) => op.apply(a0, a1),
        None => a1,
    }
}

/// Stack hypothesis for M10AE.
///
/// Low-priority operators are remembered in `p0` and empty the stack. A
/// high-priority operator adopts the candidate result and pushes the pending
/// combination `(l1, op)`. A numeral reads the combination on top of the
/// stack, applies it, folds the term into the low-priority result, and
/// replaces the whole stack with that result.
pub fn sann_m10ae_strategy(tokens: &[Token]) -> Result<(u8, StrategyTrace)> {
    validate(tokens)?;
    let mut stack: Vec<CellContent> = Vec::new();
    let (mut l0, mut l1, mut l0_candidate) = (0u8, 0u8, 0u8);
    let (mut p0, mut p1): (Option<Op>, Option<Op>) = (None, None);
    let mut steps = Vec::with_capacity(tokens.len());

    for &tok in tokens {
        match tok {
            Token::Op(op) if op.is_low_priority() => {
                p0 = Some(op);
                stack.clear();
            }
            Token::Op(op) => {
                l0 = l0_candidate;
                stack.push(CellContent::Combination { value: l1, op });
            }
            Token::Num(x) => {
                (l1, p1) = match stack.last() {
                    Some(CellContent::Combination { value, op }) => (*value, Some(*op)),
                    Some(CellContent::Value(v)) => (*v, None),
                    Some(CellContent::Input(_)) => unreachable!("never pushed"),
                    None => (0, None),
                };
                l1 = eval(p1, l1, x);
                l0_candidate = l0;
                l0 = eval(p0, l0, l1);
                stack.clear();
                stack.push(CellContent::Value(l0));
            }
        }
        steps.push(StrategyStep {
            memory: stack_snapshot(&stack),
            output: None,
            registers: Registers::Arith { l0, l0_candidate, l1, p0, p1 },
        });
    }
    if let Some(last) = steps.last_mut() {
        last.output = Some(CellContent::Value(l0));
    }
    Ok((l0, StrategyTrace { steps, cells: None }))
}
