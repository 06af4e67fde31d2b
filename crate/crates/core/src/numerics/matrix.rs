use std::ops::{Deref, DerefMut, Range};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn zeros(len: usize) -> Self {
        ComplexVector(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// Squared Euclidean norm.
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Largest entry modulus (0 for an empty vector).
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &[Complex64]) -> ComplexVector {
        assert_eq!(
            self.len(),
            other.len(),
            "length mismatch in vector subtraction"
        );
        self.0.iter().zip(other).map(|(a, b)| a - b).collect()
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for ComplexVector {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        ComplexVector(v)
    }
}

impl FromIterator<Complex64> for ComplexVector {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        ComplexVector(iter.into_iter().collect())
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `aᴴ b`
pub(crate) fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// `y -= alpha * x`
pub(crate) fn axpy_sub(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * xi;
    }
}

/// Dense complex matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Params(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from its columns, each of equal length.
    pub fn from_columns(columns: &[&[Complex64]]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Dimension {
                expected: rows,
                got: bad.len(),
            });
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Params(
                "matrix needs at least one nonempty column".into(),
            ));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Copies out a contiguous range of columns.
    pub fn column_range(&self, range: Range<usize>) -> Result<ComplexMatrix> {
        if range.start >= range.end || range.end > self.cols {
            return Err(Error::IndexOutOfRange {
                index: range.end,
                limit: self.cols,
            });
        }
        let width = range.end - range.start;
        let mut data = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[range.clone()]);
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: width,
            data,
        })
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hstack(parts: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Params("hstack of zero matrices".into()))?;
        let rows = first.rows;
        if let Some(bad) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::Dimension {
                expected: rows,
                got: bad.rows,
            });
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<ComplexVector> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `Aᴴ r`, streamed over rows.
    pub fn adjoint_mul_vec(&self, r: &[Complex64]) -> Result<ComplexVector> {
        if r.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: r.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, ri) in r.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * ri;
            }
        }
        Ok(out.into())
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}
