//! Adam with bias correction, and global-norm gradient clipping.

use mann_tensor::{Array2, Scalar};
use ndarray::Zip;

use crate::params::ParamStore;

#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: i32,
    m: ParamStore<T>,
    v: ParamStore<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || {
            let mut z = params.clone();
            for (_, a) in z.iter_mut() {
                a.fill(T::zero());
            }
            z
        };
        Self { lr, beta1, beta2, eps, steps: 0, m: zeros(), v: zeros() }
    }

    pub fn steps_taken(&self) -> i32 {
        self.steps
    }

    pub fn first_moment(&self, name: &str) -> Option<&Array2<T>> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Array2<T>> {
        self.v.get(name)
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) {
        self.steps += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(self.steps));
        let c2 = T::lit(1.0 - self.beta2.powi(self.steps));
        let (lr, eps) = (T::lit(self.lr), T::lit(self.eps));
        for (name, p) in params.iter_mut() {
            let (Some(g), Some(m), Some(v)) = (grads.get(name), self.m.get_mut(name), self.v.get_mut(name)) else {
                continue;
            };
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(T::lit(max_norm / norm));
    }
    norm
}
