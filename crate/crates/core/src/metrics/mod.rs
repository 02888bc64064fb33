//! Evaluation metrics: binary and macro-averaged precision/recall/F1 plus
//! the coreference cluster scores.
//!
//! All scores are percentages. Divisions by zero never panic: the affected
//! score becomes 0 and the result is flagged `degenerate` so callers can
//! tell a true zero from an undefined one.

pub mod assignment;
pub mod coref;

pub use coref::{coref_score, CorefScores};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall, and F1 in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when some denominator was zero and the score was forced to 0.
    #[serde(default)]
    pub degenerate: bool,
}

impl Prf {
    /// Builds from raw counts of true positives, false positives, and false
    /// negatives.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
        let mut degenerate = false;
        let p = if tp + fp == 0 {
            degenerate = true;
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            degenerate = true;
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Prf {
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * f1,
            degenerate,
        }
    }

    /// Same scores rounded to two decimals, the reporting convention.
    pub fn rounded(&self) -> Prf {
        Prf {
            precision: round2(self.precision),
            recall: round2(self.recall),
            f1: round2(self.f1),
            degenerate: self.degenerate,
        }
    }
}

/// Rounds to two decimals, half away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Precision/recall/F1 of `positive` over parallel label slices.
pub fn binary_prf<T: PartialEq>(pred: &[T], gold: &[T], positive: &T) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::validation(format!(
            "prediction and gold lengths differ: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::validation("cannot score empty label lists"));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (p, g) in pred.iter().zip(gold) {
        match (p == positive, g == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

/// Unweighted mean of one-vs-rest precision, recall, and F1 over `classes`.
/// A class absent from both slices contributes flagged zeros to the mean.
pub fn macro_prf<T: PartialEq>(pred: &[T], gold: &[T], classes: &[T]) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::validation(format!(
            "prediction and gold lengths differ: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::validation("macro average needs at least one class"));
    }
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    let mut degenerate = false;
    for class in classes {
        let prf = binary_prf(pred, gold, class)?;
        p_sum += prf.precision;
        r_sum += prf.recall;
        f_sum += prf.f1;
        degenerate |= prf.degenerate;
    }
    let k = classes.len() as f64;
    Ok(Prf {
        precision: p_sum / k,
        recall: r_sum / k,
        f1: f_sum / k,
        degenerate,
    })
}
