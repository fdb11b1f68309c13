//! The mirror task: output a sequence of random binary vectors in reverse.
//!
//! Each data vector has [`BITS`] bits packed into the low bits of a `u16`
//! (bit `j` of the vector is `(word >> j) & 1`). The model sees
//! [`INPUT_DIM`]-dimensional inputs: the nine data bits plus a delimiter flag.
//! A sample of length `L` unrolls over `2L + 1` steps: `L` encode steps, one
//! delimiter step, and `L` decode steps whose inputs are all zero.

use rand::Rng;

use crate::{Result, TaskError};

pub const BITS: usize = 9;
pub const INPUT_DIM: usize = BITS + 1;
pub const WORD_MASK: u16 = (1 << BITS) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MirrorSample {
    pub input: Vec<u16>,
}

impl MirrorSample {
    pub fn new(input: Vec<u16>) -> Result<Self> {
        if input.is_empty() {
            return Err(TaskError::EmptySequence);
        }
        Ok(Self { input: input.into_iter().map(|w| w & WORD_MASK).collect() })
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// The reversed input: `target[i] = input[L - 1 - i]`.
    pub fn target(&self) -> Vec<u16> {
        self.input.iter().rev().copied().collect()
    }

    /// Total unrolled steps: encode, delimiter, decode.
    pub fn steps(&self) -> usize {
        2 * self.len() + 1
    }

    /// Model input at unrolled step `t`.
    pub fn step_input(&self, t: usize) -> [f64; INPUT_DIM] {
        let l = self.len();
        if t < l {
            word_to_input(self.input[t])
        } else if t == l {
            delimiter_input()
        } else {
            [0.0; INPUT_DIM]
        }
    }
}

pub fn word_bits(word: u16) -> [bool; BITS] {
    std::array::from_fn(|j| (word >> j) & 1 == 1)
}

pub fn bits_to_word(bits: &[bool]) -> u16 {
    bits.iter().take(BITS).enumerate().fold(0, |acc, (j, &b)| acc | ((b as u16) << j))
}

pub fn word_to_input(word: u16) -> [f64; INPUT_DIM] {
    let mut x = [0.0; INPUT_DIM];
    for (j, b) in word_bits(word).into_iter().enumerate() {
        x[j] = if b { 1.0 } else { 0.0 };
    }
    x
}

pub fn delimiter_input() -> [f64; INPUT_DIM] {
    let mut x = [0.0; INPUT_DIM];
    x[BITS] = 1.0;
    x
}

/// Samples a length-`len` sequence with every bit Bernoulli(0.5).
pub fn gen_mirror<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<MirrorSample> {
    if len == 0 {
        return Err(TaskError::EmptySequence);
    }
    let input = (0..len).map(|_| (0..BITS).fold(0u16, |acc, j| acc | ((rng.random_bool(0.5) as u16) << j))).collect();
    MirrorSample::new(input)
}

/// `count` samples with lengths uniform over `min_len ..= max_len`.
pub fn gen_mirror_dataset<R: Rng + ?Sized>(
    count: usize,
    min_len: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<MirrorSample>> {
    if min_len == 0 || max_len < min_len {
        return Err(TaskError::EmptySequence);
    }
    (0..count)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            gen_mirror(len, rng)
        })
        .collect()
}
