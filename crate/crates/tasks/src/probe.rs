//! Fixed-structure probe sets used to average traces across samples.
//!
//! Mirror probes have a common length and every vector is the binary code of
//! a digit `1..=9` in the low four bits, so each position carries a digit
//! label. M10AE probes all follow the template
//! `N0 L0 N1 H0 N2 H1 N3 L1 N4` with each slot filled uniformly from its
//! category.

use rand::Rng;

use crate::dataset::Dataset;
use crate::m10ae::{M10aeSample, Op, Token};
use crate::mirror::MirrorSample;
use crate::TaskKind;

pub const PROBE_COUNT: usize = 500;
pub const DEFAULT_MIRROR_PROBE_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Numeral,
    Low,
    High,
}

/// Slot names and categories of the M10AE probe template, in order.
pub const M10AE_TEMPLATE: [(&str, SlotKind); 9] = [
    ("N0", SlotKind::Numeral),
    ("L0", SlotKind::Low),
    ("N1", SlotKind::Numeral),
    ("H0", SlotKind::High),
    ("N2", SlotKind::Numeral),
    ("H1", SlotKind::High),
    ("N3", SlotKind::Numeral),
    ("L1", SlotKind::Low),
    ("N4", SlotKind::Numeral),
];

/// Position of a template slot name such as `"H0"`.
pub fn template_slot(name: &str) -> Option<usize> {
    M10AE_TEMPLATE.iter().position(|(n, _)| *n == name)
}

pub fn matches_template(tokens: &[Token]) -> bool {
    tokens.len() == M10AE_TEMPLATE.len()
        && tokens.iter().zip(M10AE_TEMPLATE).all(|(tok, (_, kind))| match (tok, kind) {
            (Token::Num(d), SlotKind::Numeral) => (1..=9).contains(d),
            (Token::Op(op), SlotKind::Low) => op.is_low_priority(),
            (Token::Op(op), SlotKind::High) => !op.is_low_priority(),
            _ => false,
        })
}

/// The 9-bit vector carrying digit `d` in its low four bits.
pub fn digit_word(d: u8) -> u16 {
    assert!((1..=9).contains(&d), "probe digits are 1..=9");
    d as u16
}

/// Inverse of [`digit_word`]; `None` for vectors that are not digit codes.
pub fn word_digit(word: u16) -> Option<u8> {
    (1..=9).contains(&word).then_some(word as u8)
}

/// Probe sets share the dataset representation and file format.
pub type ProbeSet = Dataset;

pub fn gen_mirror_probes<R: Rng + ?Sized>(len: usize, count: usize, rng: &mut R) -> Vec<MirrorSample> {
    (0..count)
        .map(|_| {
            let words = (0..len).map(|_| digit_word(rng.random_range(1..=9))).collect();
            MirrorSample::new(words).expect("probe length is at least 1")
        })
        .collect()
}

pub fn gen_m10ae_probes<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<M10aeSample> {
    (0..count)
        .map(|_| {
            let tokens = M10AE_TEMPLATE
                .iter()
                .map(|(_, kind)| match kind {
                    SlotKind::Numeral => Token::Num(rng.random_range(1..=9)),
                    SlotKind::Low => Token::Op(Op::LOW[rng.random_range(0..2)]),
                    SlotKind::High => Token::Op(Op::HIGH[rng.random_range(0..2)]),
                })
                .collect();
            M10aeSample::from_tokens(tokens).expect("template is well formed")
        })
        .collect()
}

/// A [`PROBE_COUNT`]-sample probe set for `task`.
pub fn gen_probe_set<R: Rng + ?Sized>(task: TaskKind, mirror_len: usize, rng: &mut R) -> ProbeSet {
    match task {
        TaskKind::Mirror => Dataset::Mirror(gen_mirror_probes(mirror_len.max(1), PROBE_COUNT, rng)),
        TaskKind::M10ae => Dataset::M10ae(gen_m10ae_probes(PROBE_COUNT, rng)),
    }
}
