//! Named parameter matrices and their binding onto a tape.

use std::collections::BTreeMap;

use mann_tensor::{Array2, Scalar, Tape, Var};

use crate::{CoreError, Result};

/// Parameters keyed by dotted names such as `lstm.weight`, iterated in name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T: Scalar> {
    entries: BTreeMap<String, Array2<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<T>) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Array2<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<T>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array2<T>)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array2<T>)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries.
    pub fn size(&self) -> usize {
        self.entries.values().map(|a| a.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore { entries: self.entries.iter().map(|(k, v)| (k.clone(), v.mapv(|x| U::lit(x.as_f64())))).collect() }
    }

    /// Records every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Result<Bound> {
        let mut vars = BTreeMap::new();
        for (name, value) in &self.entries {
            vars.insert(name.clone(), tape.param(value.clone())?);
        }
        Ok(Bound { vars })
    }

    /// Gradients of every bound parameter after a backward pass; parameters the
    /// loss did not touch get zeros.
    pub fn grads(&self, tape: &Tape<T>, bound: &Bound) -> ParamStore<T> {
        let entries = self
            .entries
            .iter()
            .map(|(name, value)| {
                let g = bound
                    .vars
                    .get(name)
                    .and_then(|&v| tape.grad(v).cloned())
                    .unwrap_or_else(|| Array2::zeros(value.raw_dim()));
                (name.clone(), g)
            })
            .collect();
        ParamStore { entries }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|a| a.iter().all(|x| x.is_finite()))
    }

    /// Euclidean norm over all entries.
    pub fn global_norm(&self) -> f64 {
        self.entries.values().flat_map(|a| a.iter()).map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for a in self.entries.values_mut() {
            a.mapv_inplace(|x| x * factor);
        }
    }
}

/// Tape handles of a bound [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| CoreError::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn maybe(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }
}
