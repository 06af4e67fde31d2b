//! Block-sparse measurement model `y = B s + z`.
//!
//! `B` is `M × N·d` with i.i.d. CN(0, 1/M) entries, `N_a` of the `N` length-`d`
//! blocks of `s` carry i.i.d. CN(0, 1) entries and the rest are zero, and the
//! noise is CN(0, σ²·I). Block indices are zero-based throughout.
//!
//! # Interchange format
//!
//! [`ProblemInstance::write_text`] emits a whitespace-separated text file:
//!
//! ```text
//! BSPI 1
//! <N> <d> <M> <N_a> <sigma2>
//! support <i_1> ... <i_Na>
//! B
//! <re> <im>        # M·N·d lines, row-major
//! s
//! <re> <im>        # N·d lines
//! z
//! <re> <im>        # M lines
//! y
//! <re> <im>        # M lines
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so reading a file back
//! reproduces the instance bit for bit.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Number of blocks `N`.
    pub n_blocks: usize,
    /// Block length `d`.
    pub block_len: usize,
    /// Measurement count `M`.
    pub measurements: usize,
    /// Nonzero block count `N_a`.
    pub sparsity: usize,
    /// Noise variance σ² per complex entry.
    pub sigma2: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let Self {
            n_blocks: n,
            block_len: d,
            measurements: m,
            sparsity: na,
            sigma2,
        } = *self;
        if d == 0 {
            return Err(Error::Params("block length d must be at least 1".into()));
        }
        if na == 0 || na > n {
            return Err(Error::Params(format!(
                "sparsity N_a = {na} must satisfy 1 <= N_a <= N = {n}"
            )));
        }
        if m >= n * d {
            return Err(Error::Params(format!(
                "M = {m} must be below N*d = {} (compressed regime)",
                n * d
            )));
        }
        if m <= na * d {
            return Err(Error::Params(format!(
                "M = {m} must exceed N_a*d = {} (recoverable regime)",
                na * d
            )));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Params(format!(
                "noise variance sigma2 = {sigma2} must be finite and nonnegative"
            )));
        }
        Ok(())
    }

    pub fn signal_len(&self) -> usize {
        self.n_blocks * self.block_len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub params: ModelParams,
    pub b: ComplexMatrix,
    pub s: ComplexVector,
    pub z: ComplexVector,
    pub y: ComplexVector,
    /// Sorted indices of the nonzero blocks.
    pub support: Vec<usize>,
}

/// Draws `B`, the support, the block signal and the noise, in that order.
pub fn generate_instance(params: ModelParams, rng: &mut Rng) -> Result<ProblemInstance> {
    params.validate()?;
    let (m, d) = (params.measurements, params.block_len);
    let len = params.signal_len();

    let b_var = 1.0 / m as f64;
    let b = ComplexMatrix::from_fn(m, len, |_, _| rng.complex_gaussian(b_var));

    let mut blocks: Vec<usize> = (0..params.n_blocks).collect();
    let (chosen, _) = blocks.partial_shuffle(rng, params.sparsity);
    let mut support = chosen.to_vec();
    support.sort_unstable();

    let mut s = ComplexVector::zeros(len);
    for &j in &support {
        for entry in &mut s[j * d..(j + 1) * d] {
            *entry = rng.complex_gaussian(1.0);
        }
    }
    let z: ComplexVector = if params.sigma2 > 0.0 {
        (0..m)
            .map(|_| rng.complex_gaussian(params.sigma2))
            .collect()
    } else {
        ComplexVector::zeros(m)
    };
    ProblemInstance::from_parts(params, b, s, z, support)
}

/// Columns `j·d .. (j+1)·d` of `b`.
pub fn block_columns(b: &ComplexMatrix, j: usize, d: usize) -> Result<ComplexMatrix> {
    if d == 0 || (j + 1) * d > b.cols() {
        return Err(Error::IndexOutOfRange {
            index: j,
            limit: b.cols().checked_div(d).unwrap_or(0),
        });
    }
    b.column_range(j * d..(j + 1) * d)
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts, forming `y = B s + z`.
    pub fn from_parts(
        params: ModelParams,
        b: ComplexMatrix,
        s: ComplexVector,
        z: ComplexVector,
        mut support: Vec<usize>,
    ) -> Result<Self> {
        let (m, d, len) = (params.measurements, params.block_len, params.signal_len());
        if b.rows() != m || b.cols() != len {
            return Err(Error::Dimension {
                expected: m * len,
                got: b.rows() * b.cols(),
            });
        }
        if s.len() != len {
            return Err(Error::Dimension {
                expected: len,
                got: s.len(),
            });
        }
        if z.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: z.len(),
            });
        }
        support.sort_unstable();
        support.dedup();
        if let Some(&bad) = support.iter().find(|&&j| j >= params.n_blocks) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                limit: params.n_blocks,
            });
        }
        for j in (0..params.n_blocks).filter(|j| support.binary_search(j).is_err()) {
            if s[j * d..(j + 1) * d]
                .iter()
                .any(|v| *v != Complex64::new(0.0, 0.0))
            {
                return Err(Error::Params(format!(
                    "block {j} is outside the support but nonzero"
                )));
            }
        }
        let mut y = b.mul_vec(&s)?;
        for (yi, zi) in y.iter_mut().zip(z.iter()) {
            *yi += zi;
        }
        Ok(ProblemInstance {
            params,
            b,
            s,
            z,
            y,
            support,
        })
    }

    /// Sub-vector of `s` for block `j`.
    pub fn block_signal(&self, j: usize) -> &[Complex64] {
        let d = self.params.block_len;
        &self.s[j * d..(j + 1) * d]
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let p = &self.params;
        writeln!(out, "BSPI 1")?;
        writeln!(
            out,
            "{} {} {} {} {}",
            p.n_blocks, p.block_len, p.measurements, p.sparsity, p.sigma2
        )?;
        write!(out, "support")?;
        for j in &self.support {
            write!(out, " {j}")?;
        }
        writeln!(out)?;
        let mut section = |name: &str, entries: &[Complex64]| -> std::io::Result<()> {
            writeln!(out, "{name}")?;
            for v in entries {
                writeln!(out, "{} {}", v.re, v.im)?;
            }
            Ok(())
        };
        section("B", self.b.as_slice())?;
        section("s", &self.s)?;
        section("z", &self.z)?;
        section("y", &self.y)?;
        Ok(())
    }

    /// Reads the format produced by [`write_text`](Self::write_text). The
    /// stored `y` must agree with `B s + z` recomputed on load.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input reading {what}")))
        };
        fn num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
            tok.parse()
                .map_err(|_| Error::Parse(format!("bad {what}: {tok:?}")))
        }
        fn expect(tok: &str, want: &str) -> Result<()> {
            if tok == want {
                Ok(())
            } else {
                Err(Error::Parse(format!("expected {want:?}, found {tok:?}")))
            }
        }

        expect(next("magic")?, "BSPI")?;
        expect(next("version")?, "1")?;
        let params = ModelParams {
            n_blocks: num(next("N")?, "N")?,
            block_len: num(next("d")?, "d")?,
            measurements: num(next("M")?, "M")?,
            sparsity: num(next("N_a")?, "N_a")?,
            sigma2: num(next("sigma2")?, "sigma2")?,
        };
        params.validate()?;
        expect(next("support")?, "support")?;
        let support = (0..params.sparsity)
            .map(|_| num(next("support index")?, "support index"))
            .collect::<Result<Vec<usize>>>()?;

        let mut section = |name: &str, count: usize| -> Result<Vec<Complex64>> {
            expect(next(name)?, name)?;
            (0..count)
                .map(|_| {
                    let re = num(next(name)?, name)?;
                    let im = num(next(name)?, name)?;
                    Ok(Complex64::new(re, im))
                })
                .collect()
        };
        let (m, len) = (params.measurements, params.signal_len());
        let b = ComplexMatrix::new(m, len, section("B", m * len)?)?;
        let s = ComplexVector::from(section("s", len)?);
        let z = ComplexVector::from(section("z", m)?);
        let y = ComplexVector::from(section("y", m)?);

        let inst = ProblemInstance::from_parts(params, b, s, z, support)?;
        if inst.y != y {
            return Err(Error::Parse("stored y disagrees with B s + z".into()));
        }
        Ok(inst)
    }
}
