//! Adam, cosine annealing with warm restarts and global-norm clipping.

use crate::params::ParamStore;
use crate::tape::Grads;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>) -> Adam<T> {
        let zeros = || params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn update(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>, lr: f64) {
        self.step += 1;
        let c = |x: f64| T::from(x).unwrap();
        let (b1, b2) = (c(self.beta1), c(self.beta2));
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = c(lr / bc1);
        let bc2_sqrt = c(bc2.sqrt());
        let eps = c(self.eps);
        for (i, t) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads.data[i]);
            for j in 0..t.data.len() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                t.data[j] -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
            }
        }
    }
}

/// Cosine annealing with warm restarts: the rate decays from `base` to
/// `min` over each cycle of `cycle` epochs, then jumps back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineRestarts {
    pub base: f64,
    pub min: f64,
    pub cycle: f64,
}

impl CosineRestarts {
    /// Rate at a fractional epoch position.
    pub fn rate(&self, epoch: f64) -> f64 {
        let t = epoch % self.cycle;
        self.min + 0.5 * (self.base - self.min) * (1.0 + (std::f64::consts::PI * t / self.cycle).cos())
    }
}

/// Scales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut Grads<T>, max_norm: f64) -> f64 {
    let norm = grads.norm().to_f64().unwrap();
    if norm > max_norm && norm.is_finite() {
        grads.scale(T::from(max_norm / norm).unwrap());
    }
    norm
}
