//! Complex linear algebra, the normal quantile, and seeded sampling.

mod cholesky;
mod matrix;
mod normal;
mod qr;
mod rng;

pub use cholesky::IncrementalCholesky;
pub(crate) use matrix::dot_conj;
pub use matrix::{ComplexMatrix, ComplexVector};
pub use normal::{std_normal_cdf, std_normal_inv_cdf, std_normal_pdf};
pub use qr::{least_squares, IncrementalQr};
pub use rng::{sample_complex_gaussian, Rng};

pub use num_complex::Complex64;
