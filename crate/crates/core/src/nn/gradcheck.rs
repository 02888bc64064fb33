//! Central-difference verification of analytic gradients.
//!
//! The forward closure must rebuild its computation from the store on every
//! call; the checker perturbs one parameter entry at a time and compares
//! (f(x+h) - f(x-h)) / 2h against the supplied analytic gradient.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::nn::params::ParamStore;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Relative error with a floor so near-zero pairs compare absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Compares `grads` against central differences of `forward`, sampling at
/// most `samples_per_param` coordinates per tensor. The store is restored
/// to its original values before returning.
pub fn finite_difference_check<R: Rng>(
    store: &mut ParamStore,
    grads: &BTreeMap<String, Array2<f64>>,
    forward: &mut dyn FnMut(&ParamStore) -> Result<f64>,
    h: f64,
    samples_per_param: usize,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport { max_rel_err: 0.0, checked: 0 };
    for (name, grad) in grads {
        let (rows, cols) = grad.dim();
        let total = rows * cols;
        let picks: Vec<usize> = if total <= samples_per_param {
            (0..total).collect()
        } else {
            rand::seq::index::sample(rng, total, samples_per_param).into_vec()
        };
        for flat in picks {
            let (r, c) = (flat / cols, flat % cols);
            let original = store.get(name)?[[r, c]];
            store.get_mut(name)?[[r, c]] = original + h;
            let plus = forward(store)?;
            store.get_mut(name)?[[r, c]] = original - h;
            let minus = forward(store)?;
            store.get_mut(name)?[[r, c]] = original;
            let fd = (plus - minus) / (2.0 * h);
            let err = relative_error(fd, grad[[r, c]]);
            if err > report.max_rel_err {
                report.max_rel_err = err;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
