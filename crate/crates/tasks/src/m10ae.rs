//! Modulo-10 arithmetic expressions.
//!
//! Expressions alternate single-digit numerals `1..=9` with the operators
//! `+ - * /`. `*` and `/` bind tighter than `+` and `-`, operators of equal
//! priority associate left to right, `/` is the modulo operator, and every
//! intermediate result is reduced into `0..=9` (mathematical modulo, so
//! `1 - 5` is 6). The label is the final value; the difficulty measure is the
//! number of low-priority operators (#LPO).

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Result, TaskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Mod,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Mod];
    pub const LOW: [Op; 2] = [Op::Add, Op::Sub];
    pub const HIGH: [Op; 2] = [Op::Mul, Op::Mod];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Mod => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Op> {
        match c {
            '+' => Some(Op::Add),
            '-' | '−' => Some(Op::Sub),
            '*' | '×' => Some(Op::Mul),
            '/' | '%' => Some(Op::Mod),
            _ => None,
        }
    }

    pub fn is_low_priority(self) -> bool {
        matches!(self, Op::Add | Op::Sub)
    }

    /// `(a op b) mod 10`, always in `0..=9`.
    ///
    /// Panics if `op` is `/` and `b` is 0; numerals are never 0 so a
    /// well-formed expression cannot trigger it.
    pub fn apply(self, a: u8, b: u8) -> u8 {
        let (a, b) = (a as i32, b as i32);
        let r = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Mod => {
                assert!(b != 0, "modulo by zero");
                a.rem_euclid(b)
            }
        };
        r.rem_euclid(10) as u8
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Num(u8),
    Op(Op),
}

/// Embedding vocabulary: digits 1..=9, the four operators, and padding.
pub const VOCAB_SIZE: usize = 14;
pub const PAD_INDEX: usize = 13;

impl Token {
    pub fn index(self) -> usize {
        match self {
            Token::Num(d) => d as usize - 1,
            Token::Op(op) => 9 + op as usize,
        }
    }

    pub fn from_index(i: usize) -> Option<Token> {
        match i {
            0..=8 => Some(Token::Num(i as u8 + 1)),
            9..=12 => Some(Token::Op(Op::ALL[i - 9])),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(d) => write!(f, "{d}"),
            Token::Op(op) => write!(f, "{op}"),
        }
    }
}

pub fn format_tokens(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.to_string()).collect()
}

/// Parses a compact expression such as `8+6*3/2-4`. Whitespace is ignored.
/// Only the character set is checked here; see [`validate`] for the grammar.
pub fn parse(s: &str) -> Result<Vec<Token>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .enumerate()
        .map(|(i, c)| match c {
            '1'..='9' => Ok(Token::Num(c as u8 - b'0')),
            _ => Op::from_symbol(c)
                .map(Token::Op)
                .ok_or(TaskError::Malformed { position: i, reason: format!("unexpected character {c:?}") }),
        })
        .collect()
}

/// Checks the grammar `numeral (op numeral)*` with numerals in `1..=9`.
pub fn validate(tokens: &[Token]) -> Result<()> {
    if tokens.is_empty() {
        return Err(TaskError::Malformed { position: 0, reason: "empty expression".into() });
    }
    for (i, tok) in tokens.iter().enumerate() {
        match (i % 2, tok) {
            (0, Token::Num(d)) if (1..=9).contains(d) => {}
            (0, Token::Num(d)) => {
                return Err(TaskError::Malformed { position: i, reason: format!("numeral {d} outside 1..=9") })
            }
            (0, Token::Op(op)) => {
                return Err(TaskError::Malformed { position: i, reason: format!("expected numeral, found `{op}`") })
            }
            (_, Token::Num(d)) => {
                return Err(TaskError::Malformed { position: i, reason: format!("expected operator, found `{d}`") })
            }
            _ => {}
        }
    }
    if tokens.len().is_multiple_of(2) {
        return Err(TaskError::Malformed { position: tokens.len(), reason: "expression ends with an operator".into() });
    }
    Ok(())
}

/// Evaluates an expression in one left-to-right pass, keeping the folded
/// low-priority total and the running high-priority term.
pub fn eval_m10ae(tokens: &[Token]) -> Result<u8> {
    validate(tokens)?;
    let num = |i: usize| match tokens[i] {
        Token::Num(d) => d,
        Token::Op(_) => unreachable!("validated"),
    };
    let mut total: Option<(u8, Op)> = None;
    let mut term = num(0);
    for pair in (1..tokens.len()).step_by(2) {
        let Token::Op(op) = tokens[pair] else { unreachable!("validated") };
        let rhs = num(pair + 1);
        if op.is_low_priority() {
            let folded = match total {
                Some((acc, pending)) => pending.apply(acc, term),
                None => term,
            };
            total = Some((folded, op));
            term = rhs;
        } else {
            term = op.apply(term, rhs);
        }
    }
    Ok(match total {
        Some((acc, pending)) => pending.apply(acc, term),
        None => term,
    })
}

pub fn count_lpo(tokens: &[Token]) -> usize {
    tokens.iter().filter(|t| matches!(t, Token::Op(op) if op.is_low_priority())).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct M10aeSample {
    pub tokens: Vec<Token>,
    pub label: u8,
    pub n_lpo: usize,
}

impl M10aeSample {
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        let label = eval_m10ae(&tokens)?;
        let n_lpo = count_lpo(&tokens);
        Ok(Self { tokens, label, n_lpo })
    }

    pub fn expr(&self) -> String {
        format_tokens(&self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Relative frequency of low- versus high-priority operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpWeights {
    pub low: f64,
    pub high: f64,
}

impl Default for OpWeights {
    fn default() -> Self {
        Self { low: 1.0, high: 1.0 }
    }
}

fn random_numeral<R: Rng + ?Sized>(rng: &mut R) -> Token {
    Token::Num(rng.random_range(1..=9))
}

fn random_op<R: Rng + ?Sized>(low: bool, rng: &mut R) -> Token {
    let pool = if low { &Op::LOW } else { &Op::HIGH };
    Token::Op(pool[rng.random_range(0..2)])
}

fn assemble<R: Rng + ?Sized>(categories: &[bool], rng: &mut R) -> M10aeSample {
    let mut tokens = Vec::with_capacity(2 * categories.len() + 1);
    tokens.push(random_numeral(rng));
    for &low in categories {
        tokens.push(random_op(low, rng));
        tokens.push(random_numeral(rng));
    }
    M10aeSample::from_tokens(tokens).expect("generated expressions are well formed")
}

/// An expression with `n_ops` operators whose categories are drawn
/// independently with the given weights; numerals and the operator within a
/// category are uniform.
pub fn gen_m10ae<R: Rng + ?Sized>(n_ops: usize, weights: OpWeights, rng: &mut R) -> M10aeSample {
    let p_low = weights.low / (weights.low + weights.high);
    let categories: Vec<bool> = (0..n_ops).map(|_| rng.random_bool(p_low)).collect();
    assemble(&categories, rng)
}

/// An expression with exactly `n_lpo` low- and `n_hpo` high-priority
/// operators in random order.
pub fn gen_m10ae_with_counts<R: Rng + ?Sized>(n_lpo: usize, n_hpo: usize, rng: &mut R) -> M10aeSample {
    let mut categories: Vec<bool> = std::iter::repeat_n(true, n_lpo).chain(std::iter::repeat_n(false, n_hpo)).collect();
    categories.shuffle(rng);
    assemble(&categories, rng)
}

/// Draws `count` distinct expressions not present in `seen`, adding each to it.
///
/// #LPO is uniform over `0 ..= max_lpo` and the number of high-priority
/// operators uniform over `0 ..= n_lpo + 1`. A draw that collides with `seen`
/// is rejected and the counts are redrawn, so tiny buckets that exhaust
/// their expression space shed mass to the others.
pub fn gen_m10ae_dataset<R: Rng + ?Sized>(
    count: usize,
    max_lpo: usize,
    seen: &mut HashSet<Vec<Token>>,
    rng: &mut R,
) -> Vec<M10aeSample> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n_lpo = rng.random_range(0..=max_lpo);
        let n_hpo = rng.random_range(0..=n_lpo + 1);
        let sample = gen_m10ae_with_counts(n_lpo, n_hpo, rng);
        if seen.insert(sample.tokens.clone()) {
            out.push(sample);
        }
    }
    out
}
