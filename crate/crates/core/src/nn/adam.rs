//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: BTreeMap<String, Array2<f64>>,
    v: BTreeMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update from `grads`. Parameters without a gradient this
    /// step are left untouched; a gradient for an unknown parameter or with
    /// the wrong shape is an error.
    pub fn step(&mut self, store: &mut ParamStore, grads: &BTreeMap<String, Array2<f64>>) -> Result<()> {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for (name, grad) in grads {
            let value = store.get_mut(name)?;
            if value.dim() != grad.dim() {
                return Err(Error::dimension(format!(
                    "gradient for {name} has shape {:?}, parameter is {:?}",
                    grad.dim(),
                    value.dim()
                )));
            }
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            *m *= self.beta1;
            *m += &(grad * (1.0 - self.beta1));
            *v *= self.beta2;
            *v += &(&(grad * grad) * (1.0 - self.beta2));
            let m_hat = &*m / bc1;
            let v_hat = &*v / bc2;
            let update = &m_hat / &(v_hat.mapv(f64::sqrt) + self.eps);
            *value -= &(&update * self.lr);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        // With bias correction, step one is lr * g / (|g| + eps') per entry.
        let mut store = ParamStore::new();
        store.insert("w", array![[1.0, -1.0]]).unwrap();
        let mut opt = Adam::new(0.1);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), array![[0.5, -0.5]]);
        opt.step(&mut store, &grads).unwrap();
        let w = store.get("w").unwrap();
        assert!((w[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((w[[0, 1]] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn descends_a_quadratic() {
        // Minimize (w - 3)^2 from w = 0.
        let mut store = ParamStore::new();
        store.insert("w", array![[0.0]]).unwrap();
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let w = store.get("w").unwrap()[[0, 0]];
            let mut grads = BTreeMap::new();
            grads.insert("w".to_string(), array![[2.0 * (w - 3.0)]]);
            opt.step(&mut store, &grads).unwrap();
        }
        let w = store.get("w").unwrap()[[0, 0]];
        assert!((w - 3.0).abs() < 1e-2, "converged to {w}");
    }

    #[test]
    fn unknown_parameter_is_an_error() {
        let mut store = ParamStore::new();
        let mut grads = BTreeMap::new();
        grads.insert("ghost".to_string(), array![[1.0]]);
        assert!(Adam::new(0.1).step(&mut store, &grads).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut store = ParamStore::new();
        store.insert("w", array![[1.0, 2.0]]).unwrap();
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), array![[1.0]]);
        assert!(Adam::new(0.1).step(&mut store, &grads).is_err());
    }
}
