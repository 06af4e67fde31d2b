use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ComplexVector};
use crate::error::{Error, Result};

/// A squared pivot below this fraction of its Gram diagonal entry is
/// treated as rank loss.
const PIVOT_TOL: f64 = 1e-14;

/// Cholesky factor `G = L Lᴴ` of a Gram matrix `G = Aᴴ A`, grown one block
/// of columns at a time. Solving `G x = Aᴴ y` gives the least-squares
/// coefficients of `y` on the columns of `A`.
#[derive(Debug, Clone, Default)]
pub struct IncrementalCholesky {
    /// Row i holds its i+1 leading entries.
    l: Vec<Vec<Complex64>>,
}

impl IncrementalCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn clear(&mut self) {
        self.l.clear();
    }

    /// Extends the factor with `b` new columns. `cross` is the row-major
    /// `dim × b` matrix of inner products of the existing columns with the new
    /// ones; `diag` is the `b × b` Gram block of the new columns. On failure
    /// nothing changes.
    pub fn push_block(&mut self, cross: &[Complex64], diag: &ComplexMatrix) -> Result<()> {
        let n = self.dim();
        let b = diag.cols();
        if diag.rows() != b {
            return Err(Error::Dimension {
                expected: b,
                got: diag.rows(),
            });
        }
        if cross.len() != n * b {
            return Err(Error::Dimension {
                expected: n * b,
                got: cross.len(),
            });
        }
        for c in 0..b {
            let row_index = n + c;
            let mut row = Vec::with_capacity(row_index + 1);
            for i in 0..row_index {
                let g = if i < n {
                    cross[i * b + c].conj()
                } else {
                    diag.get(c, i - n)
                };
                let li = &self.l[i];
                let acc = row
                    .iter()
                    .zip(li.iter())
                    .fold(g, |acc, (a, lk): (&Complex64, &Complex64)| {
                        acc - a * lk.conj()
                    });
                row.push(acc / li[i].re);
            }
            let gdd = diag.get(c, c).re;
            let pivot2 = gdd - row.iter().map(|v| v.norm_sqr()).sum::<f64>();
            if gdd.is_nan() || gdd <= 0.0 || pivot2 <= PIVOT_TOL * gdd {
                self.l.truncate(n);
                return Err(Error::Singular {
                    column: row_index,
                    cols: n + b,
                });
            }
            row.push(Complex64::new(pivot2.sqrt(), 0.0));
            self.l.push(row);
        }
        Ok(())
    }

    /// Solves `L Lᴴ x = rhs`.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<ComplexVector> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut w = rhs.to_vec();
        for i in 0..n {
            let row = &self.l[i];
            let acc = row[..i]
                .iter()
                .zip(&w[..i])
                .fold(w[i], |acc, (l, x)| acc - l * x);
            w[i] = acc / row[i].re;
        }
        for i in (0..n).rev() {
            let row = &self.l[i];
            let xi = w[i] / row[i].re;
            w[i] = xi;
            for (wk, lk) in w[..i].iter_mut().zip(&row[..i]) {
                *wk -= lk.conj() * xi;
            }
        }
        Ok(w.into())
    }
}
