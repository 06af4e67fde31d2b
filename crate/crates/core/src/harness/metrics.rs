use num_complex::Complex64;

use crate::error::{Error, Result};

/// `‖s − ŝ‖² / ‖s‖²`.
pub fn nmse(truth: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let energy: f64 = truth.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE of an all-zero signal".into()));
    }
    let err: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / energy)
}

/// Fraction of the true support that was detected.
pub fn detection_probability(true_support: &[usize], detected: &[usize]) -> Result<f64> {
    if true_support.is_empty() {
        return Err(Error::Domain("detection rate over an empty support".into()));
    }
    let hits = true_support.iter().filter(|j| detected.contains(j)).count();
    Ok(hits as f64 / true_support.len() as f64)
}

/// Fraction of positions where the decided symbol differs from the truth.
pub fn symbol_error_rate(truth: &[Complex64], decided: &[Complex64]) -> Result<f64> {
    if truth.len() != decided.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: decided.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Domain("symbol error rate over no symbols".into()));
    }
    let errors = truth
        .iter()
        .zip(decided)
        .filter(|(t, d)| (*t - *d).norm() > 1e-9)
        .count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}
