//! Least squares through orthogonal factorizations.
//!
//! [`least_squares`] is the dense reference: a Householder QR of the full
//! system, recomputed from scratch. [`IncrementalQr`] keeps a thin QR that
//! grows one column at a time (Gram-Schmidt with a second
//! reorthogonalization pass) so greedy loops only pay for the new block at
//! each iteration. The two agree to rounding on well-conditioned systems and
//! the dense path is what the incremental one is tested against.

use num_complex::Complex64;

use super::matrix::{axpy_sub, dot_conj, norm_sqr, ComplexMatrix, ComplexVector};
use crate::error::{Error, Result};

/// Columns whose remaining component falls below this fraction of the
/// reference scale are treated as linearly dependent (condition ~1e12).
const RANK_TOL: f64 = 1e-12;

/// Solves `argmin_x ‖y − A x‖₂` with a dense Householder QR.
///
/// Requires `A` to have at least as many rows as columns and full column rank.
pub fn least_squares(a: &ComplexMatrix, y: &[Complex64]) -> Result<ComplexVector> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: y.len(),
        });
    }
    if n > m {
        return Err(Error::Degenerate { cols: n, rows: m });
    }

    // column-major working copy
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j).into_inner()).collect();
    let mut rhs = y.to_vec();
    let scale = cols.iter().map(|c| norm_sqr(c).sqrt()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular { column: 0, cols: n });
    }

    let mut v = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n {
        let x = &cols[j][j..];
        let norm_x = norm_sqr(x).sqrt();
        if norm_x <= RANK_TOL * scale {
            return Err(Error::Singular { column: j, cols: n });
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;

        let v = &mut v[..m - j];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let v_norm2 = norm_sqr(v);

        for col in cols.iter_mut().skip(j + 1) {
            let w = dot_conj(v, &col[j..]) * (2.0 / v_norm2);
            axpy_sub(&mut col[j..], w, v);
        }
        let w = dot_conj(v, &rhs[j..]) * (2.0 / v_norm2);
        axpy_sub(&mut rhs[j..], w, v);

        cols[j][j] = alpha;
        for entry in cols[j][j + 1..].iter_mut() {
            *entry = Complex64::new(0.0, 0.0);
        }
    }

    // R x = (Qᴴ y)[..n]
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        let mut acc = rhs[j];
        for (i, xi) in x.iter().enumerate().skip(j + 1) {
            acc -= cols[i][j] * xi;
        }
        x[j] = acc / cols[j][j];
    }
    Ok(x.into())
}

/// Thin QR factorization `A = Q R` that supports appending columns.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    /// Orthonormal columns of Q.
    q: Vec<Vec<Complex64>>,
    /// Column j of R holds its j+1 nonzero leading entries.
    r: Vec<Vec<Complex64>>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        IncrementalQr {
            rows,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.q.len()
    }

    pub fn clear(&mut self) {
        self.q.clear();
        self.r.clear();
    }

    /// Appends one column, failing if it is numerically in the span of the
    /// columns already present. On failure the factorization is unchanged.
    pub fn push_column(&mut self, a: &[Complex64]) -> Result<()> {
        if a.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: a.len(),
            });
        }
        let n = self.q.len();
        if n >= self.rows {
            return Err(Error::Degenerate {
                cols: n + 1,
                rows: self.rows,
            });
        }
        let a_norm = norm_sqr(a).sqrt();
        let mut v = a.to_vec();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        for _ in 0..2 {
            for (qi, ci) in self.q.iter().zip(coeffs.iter_mut()) {
                let c = dot_conj(qi, &v);
                axpy_sub(&mut v, c, qi);
                *ci += c;
            }
        }
        let rem = norm_sqr(&v).sqrt();
        if a_norm == 0.0 || rem <= RANK_TOL * a_norm {
            return Err(Error::Singular {
                column: n,
                cols: n + 1,
            });
        }
        let inv = 1.0 / rem;
        v.iter_mut().for_each(|z| *z *= inv);
        coeffs[n] = Complex64::new(rem, 0.0);
        self.q.push(v);
        self.r.push(coeffs);
        Ok(())
    }

    /// Appends every column of `block`; rolls back all of them on failure.
    pub fn push_block(&mut self, block: &ComplexMatrix) -> Result<()> {
        let before = self.cols();
        for j in 0..block.cols() {
            if let Err(e) = self.push_column(&block.column(j)) {
                self.q.truncate(before);
                self.r.truncate(before);
                return Err(e);
            }
        }
        Ok(())
    }

    /// Least-squares coefficients for the current column set.
    pub fn solve(&self, y: &[Complex64]) -> Result<ComplexVector> {
        if y.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: y.len(),
            });
        }
        let n = self.cols();
        let z: Vec<Complex64> = self.q.iter().map(|qi| dot_conj(qi, y)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for j in (0..n).rev() {
            let mut acc = z[j];
            for (i, xi) in x.iter().enumerate().skip(j + 1) {
                acc -= self.r[i][j] * xi;
            }
            x[j] = acc / self.r[j][j];
        }
        Ok(x.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_gaussian(1.0))
    }

    #[test]
    fn identity_system_returns_rhs() {
        let a = ComplexMatrix::identity(2);
        let x = least_squares(&a, &[c(3.0, 1.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(3.0, 1.0)).norm() < 1e-15);
        assert!((x[1] - c(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_column_matches_hand_normal_equations() {
        // (AᴴA)⁻¹Aᴴy = (1 + 3) / 2
        let a = ComplexMatrix::new(2, 1, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let x = least_squares(&a, &[c(1.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_columns_reduce_to_adjoint_product() {
        let mut rng = Rng::new(11);
        let a = random_matrix(&mut rng, 9, 4);
        let mut qr = IncrementalQr::new(9);
        qr.push_block(&a).unwrap();
        let q = ComplexMatrix::from_columns(&qr.q.iter().map(|v| v.as_slice()).collect::<Vec<_>>())
            .unwrap();
        let y: Vec<_> = (0..9).map(|_| rng.complex_gaussian(1.0)).collect();
        let x = least_squares(&q, &y).unwrap();
        let expected = q.adjoint_mul_vec(&y).unwrap();
        for (u, v) in x.iter().zip(expected.iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_is_reported() {
        let col = [c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)];
        let doubled: Vec<_> = col.iter().map(|z| z * 2.0).collect();
        let a = ComplexMatrix::from_columns(&[&col, &doubled]).unwrap();
        let err = least_squares(&a, &[c(1.0, 0.0); 3]).unwrap_err();
        assert!(matches!(err, Error::Singular { column: 1, cols: 2 }));

        let mut qr = IncrementalQr::new(3);
        qr.push_column(&col).unwrap();
        assert!(matches!(
            qr.push_column(&doubled),
            Err(Error::Singular { .. })
        ));
        assert_eq!(qr.cols(), 1);
    }

    #[test]
    fn wide_system_is_degenerate() {
        let a = ComplexMatrix::identity(2).column_range(0..1).unwrap();
        let wide = ComplexMatrix::hstack(&[&a, &a, &a]).unwrap();
        assert!(matches!(
            least_squares(&wide, &[c(1.0, 0.0); 2]),
            Err(Error::Degenerate { cols: 3, rows: 2 })
        ));
    }

    #[test]
    fn incremental_matches_dense() {
        let mut rng = Rng::new(5);
        let a = random_matrix(&mut rng, 40, 12);
        let y: Vec<_> = (0..40).map(|_| rng.complex_gaussian(1.0)).collect();
        let dense = least_squares(&a, &y).unwrap();
        let mut qr = IncrementalQr::new(40);
        qr.push_block(&a.column_range(0..5).unwrap()).unwrap();
        qr.push_block(&a.column_range(5..12).unwrap()).unwrap();
        let inc = qr.solve(&y).unwrap();
        let scale = dense.norm();
        assert!(dense.sub(&inc).norm() <= 1e-12 * scale);
    }
}
