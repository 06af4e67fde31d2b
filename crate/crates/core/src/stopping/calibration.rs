//! Monte Carlo sampling of the residual energy for a fixed detected set.
//!
//! Draws only the columns that matter: the `found` supporting blocks and the
//! `spurious` non-supporting blocks that make up Λ, plus the `remaining`
//! supporting blocks outside Λ. The remaining `N − k − n_a` columns of `B`
//! never touch the residual, so they are not generated.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, IncrementalQr, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedSetup {
    pub measurements: usize,
    pub block_len: usize,
    /// Supporting blocks inside Λ.
    pub found: usize,
    /// Non-supporting blocks inside Λ.
    pub spurious: usize,
    /// Supporting blocks outside Λ (`n_a`).
    pub remaining: usize,
    pub sigma2: f64,
}

impl DetectedSetup {
    /// `k = |Λ|`.
    pub fn detected(&self) -> usize {
        self.found + self.spurious
    }

    pub fn cols_in_ls(&self) -> usize {
        self.detected() * self.block_len
    }
}

/// One draw of `E = ‖y − B_Λ s̄_Λ‖²` under the block-sparse model.
pub fn sample_residual_energy(setup: &DetectedSetup, rng: &mut Rng) -> Result<f64> {
    let m = setup.measurements;
    let d = setup.block_len;
    if d == 0 || setup.cols_in_ls() >= m {
        return Err(Error::Degenerate {
            cols: setup.cols_in_ls(),
            rows: m,
        });
    }
    let col_var = 1.0 / m as f64;
    let mut y: ComplexVector = if setup.sigma2 > 0.0 {
        (0..m).map(|_| rng.complex_gaussian(setup.sigma2)).collect()
    } else {
        ComplexVector::zeros(m)
    };

    let mut lambda_cols: Vec<Vec<Complex64>> = Vec::with_capacity(setup.cols_in_ls());
    let column = |rng: &mut Rng| -> Vec<Complex64> {
        (0..m).map(|_| rng.complex_gaussian(col_var)).collect()
    };
    // supporting columns contribute to y; Λ keeps the found ones
    for idx in 0..(setup.found + setup.remaining) * d {
        let col = column(rng);
        let amp = rng.complex_gaussian(1.0);
        for (yi, bi) in y.iter_mut().zip(&col) {
            *yi += bi * amp;
        }
        if idx < setup.found * d {
            lambda_cols.push(col);
        }
    }
    for _ in 0..setup.spurious * d {
        lambda_cols.push(column(rng));
    }

    let mut qr = IncrementalQr::new(m);
    for col in &lambda_cols {
        qr.push_column(col)?;
    }
    let coef = qr.solve(&y)?;
    let mut residual = y;
    for (col, c) in lambda_cols.iter().zip(coef.iter()) {
        for (ri, bi) in residual.iter_mut().zip(col) {
            *ri -= bi * c;
        }
    }
    Ok(residual.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_complete_detection_leaves_nothing() {
        let setup = DetectedSetup {
            measurements: 50,
            block_len: 3,
            found: 2,
            spurious: 1,
            remaining: 0,
            sigma2: 0.0,
        };
        let e = sample_residual_energy(&setup, &mut Rng::new(1)).unwrap();
        assert!(e < 1e-20, "{e}");
    }

    #[test]
    fn oversized_fit_is_degenerate() {
        let setup = DetectedSetup {
            measurements: 20,
            block_len: 5,
            found: 4,
            spurious: 0,
            remaining: 1,
            sigma2: 0.1,
        };
        assert!(matches!(
            sample_residual_energy(&setup, &mut Rng::new(1)),
            Err(Error::Degenerate { .. })
        ));
    }
}
