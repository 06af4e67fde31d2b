use num_complex::Complex64;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::ComplexVector;
use crate::error::{Error, Result};

/// Deterministic random stream.
///
/// Independent streams for parallel trials come from [`Rng::derive`], which
/// hashes a master seed together with a path of keys (cell, trial, ...), so
/// the stream a trial sees does not depend on scheduling.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream keyed by `(master, keys...)`.
    pub fn derive(master: u64, keys: &[u64]) -> Self {
        let seed = keys
            .iter()
            .fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)));
        Rng::new(seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One circularly-symmetric complex Gaussian draw with total variance
    /// `variance` (each of re/im carries half).
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let s = (0.5 * variance).sqrt();
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }

    /// Uniform random bits as 0/1 bytes.
    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| (self.inner.next_u32() & 1) as u8).collect()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `n` i.i.d. samples from CN(0, variance).
pub fn sample_complex_gaussian(rng: &mut Rng, variance: f64, n: usize) -> Result<ComplexVector> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Domain(format!(
            "complex Gaussian variance must be positive and finite, got {variance}"
        )));
    }
    Ok((0..n).map(|_| rng.complex_gaussian(variance)).collect())
}
