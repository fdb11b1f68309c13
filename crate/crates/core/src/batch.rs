//! Batches of task samples in the form the model consumes.
//!
//! Mirror batches hold samples of one length, so every step has the same
//! meaning across the batch. M10AE batches are padded at the end with the
//! padding token; each sample's output is read at its own last position, so
//! padding never reaches the loss.

use mann_tasks::m10ae::{M10aeSample, PAD_INDEX};
use mann_tasks::mirror::{word_bits, MirrorSample, BITS, INPUT_DIM};
use mann_tensor::{Array2, Scalar};

use crate::{CoreError, Result};

/// The input of one unrolled step for the whole batch.
#[derive(Debug, Clone, PartialEq)]
pub enum StepInput<T: Scalar> {
    /// `B × in` dense vectors.
    Dense(Array2<T>),
    /// One token index per batch item.
    Tokens(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target<T: Scalar> {
    /// Bit targets for the steps `first_step ..`, one `B × 9` matrix per step.
    Bits { first_step: usize, bits: Vec<Array2<T>> },
    /// A class label read at each item's `last` step.
    Class { last: Vec<usize>, labels: Vec<usize> },
    /// No supervision; outputs are produced at every step.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T: Scalar> {
    pub inputs: Vec<StepInput<T>>,
    pub target: Target<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn size(&self) -> usize {
        match self.inputs.first() {
            Some(StepInput::Dense(a)) => a.nrows(),
            Some(StepInput::Tokens(t)) => t.len(),
            None => 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// Steps at which an output is read.
    pub fn output_steps(&self) -> Vec<usize> {
        match &self.target {
            Target::Bits { first_step, bits } => (*first_step..first_step + bits.len()).collect(),
            Target::Class { last, .. } => {
                let mut s = last.clone();
                s.sort_unstable();
                s.dedup();
                s
            }
            Target::None => (0..self.inputs.len()).collect(),
        }
    }

    /// The same inputs without targets.
    pub fn unsupervised(&self) -> Batch<T> {
        Batch { inputs: self.inputs.clone(), target: Target::None }
    }
}

fn word_row<T: Scalar>(word: u16) -> [T; BITS] {
    word_bits(word).map(|b| if b { T::one() } else { T::zero() })
}

/// Encode, delimiter and all-zero decode inputs with reversed targets.
pub fn mirror_batch<T: Scalar>(samples: &[MirrorSample]) -> Result<Batch<T>> {
    let len = samples.first().ok_or(CoreError::EmptySequence)?.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != len) {
        return Err(CoreError::Dimension { what: "mirror batch sequence length", expected: len, got: bad.len() });
    }
    let b = samples.len();
    let steps = 2 * len + 1;
    let inputs = (0..steps)
        .map(|t| {
            let rows = Array2::from_shape_fn((b, INPUT_DIM), |(i, j)| T::lit(samples[i].step_input(t)[j]));
            StepInput::Dense(rows)
        })
        .collect();
    let bits = (0..len)
        .map(|j| Array2::from_shape_fn((b, BITS), |(i, k)| word_row::<T>(samples[i].input[len - 1 - j])[k]))
        .collect();
    Ok(Batch { inputs, target: Target::Bits { first_step: len + 1, bits } })
}

/// Token inputs padded to the longest sample.
pub fn m10ae_batch<T: Scalar>(samples: &[M10aeSample]) -> Result<Batch<T>> {
    let steps = samples.iter().map(|s| s.len()).max().ok_or(CoreError::EmptySequence)?;
    let inputs = (0..steps)
        .map(|t| {
            StepInput::Tokens(samples.iter().map(|s| s.tokens.get(t).map_or(PAD_INDEX, |tok| tok.index())).collect())
        })
        .collect();
    Ok(Batch {
        inputs,
        target: Target::Class {
            last: samples.iter().map(|s| s.len() - 1).collect(),
            labels: samples.iter().map(|s| s.label as usize).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mann_tasks::m10ae::parse;

    #[test]
    fn mirror_layout() {
        let samples =
            vec![MirrorSample::new(vec![0b1, 0b10]).unwrap(), MirrorSample::new(vec![0b100, 0b1000]).unwrap()];
        let batch = mirror_batch::<f64>(&samples).unwrap();
        assert_eq!(batch.steps(), 5);
        assert_eq!(batch.size(), 2);
        let StepInput::Dense(eos) = &batch.inputs[2] else { unreachable!() };
        assert_eq!(eos.column(9).to_vec(), vec![1.0, 1.0]);
        let Target::Bits { first_step, bits } = &batch.target else { unreachable!() };
        assert_eq!(*first_step, 3);
        assert_eq!(bits[0].row(0).to_vec()[..2], [0.0, 1.0]);
        assert_eq!(bits[1].row(1).to_vec()[..3], [0.0, 0.0, 1.0]);
        assert_eq!(batch.output_steps(), vec![3, 4]);
    }

    #[test]
    fn mixed_lengths_rejected() {
        let samples = vec![MirrorSample::new(vec![1]).unwrap(), MirrorSample::new(vec![1, 2]).unwrap()];
        assert!(mirror_batch::<f64>(&samples).is_err());
    }

    #[test]
    fn m10ae_padding() {
        let samples = vec![
            M10aeSample::from_tokens(parse("3+4").unwrap()).unwrap(),
            M10aeSample::from_tokens(parse("5").unwrap()).unwrap(),
        ];
        let batch = m10ae_batch::<f64>(&samples).unwrap();
        assert_eq!(batch.steps(), 3);
        assert_eq!(batch.inputs[2], StepInput::Tokens(vec![3, PAD_INDEX]));
        assert_eq!(batch.target, Target::Class { last: vec![2, 0], labels: vec![7, 5] });
        assert_eq!(batch.output_steps(), vec![0, 2]);
    }
}
