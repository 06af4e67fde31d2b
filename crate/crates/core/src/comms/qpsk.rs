//! Gray-mapped unit-energy QPSK.
//!
//! The first bit of each pair rides on the real part and the second on the
//! imaginary part, with 0 ↦ +1/√2 and 1 ↦ −1/√2:
//!
//! | bits | symbol          |
//! |------|-----------------|
//! | 00   | (+1 + i)/√2     |
//! | 01   | (+1 − i)/√2     |
//! | 10   | (−1 + i)/√2     |
//! | 11   | (−1 − i)/√2     |

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexVector;

fn level(bit: u8) -> f64 {
    if bit & 1 == 0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    }
}

pub fn qpsk_modulate(bits: &[u8]) -> Result<ComplexVector> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Codec(format!(
            "QPSK needs an even number of bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex64::new(level(p[0]), level(p[1])))
        .collect())
}

/// Hard decisions, two bits per symbol.
pub fn qpsk_hard_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// Nearest constellation point.
pub fn qpsk_decide(symbol: Complex64) -> Complex64 {
    Complex64::new(
        level(u8::from(symbol.re < 0.0)),
        level(u8::from(symbol.im < 0.0)),
    )
}

/// Per-bit LLRs `log P(b=0)/P(b=1)` for symbols observed in complex
/// Gaussian noise of total variance `noise_var`. For this mapping the LLRs
/// are exact and separable: `2√2·Re(x)/N₀` and `2√2·Im(x)/N₀`.
pub fn qpsk_soft_demodulate(symbols: &[Complex64], noise_var: f64) -> Result<Vec<f64>> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::Domain(format!(
            "noise variance for LLRs must be positive, got {noise_var}"
        )));
    }
    let scale = 2.0 * SQRT_2 / noise_var;
    Ok(symbols
        .iter()
        .flat_map(|s| [scale * s.re, scale * s.im])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_table() {
        let s = qpsk_modulate(&[0, 0, 0, 1, 1, 0, 1, 1]).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_eq!(s[0], Complex64::new(h, h));
        assert_eq!(s[1], Complex64::new(h, -h));
        assert_eq!(s[2], Complex64::new(-h, h));
        assert_eq!(s[3], Complex64::new(-h, -h));
        for v in s.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_length_rejected() {
        assert!(qpsk_modulate(&[0, 1, 1]).is_err());
    }

    #[test]
    fn hard_round_trip() {
        let bits = [1, 0, 0, 0, 1, 1, 0, 1];
        assert_eq!(qpsk_hard_demodulate(&qpsk_modulate(&bits).unwrap()), bits);
    }

    #[test]
    fn llr_signs_and_scaling() {
        let s = qpsk_modulate(&[0, 1]).unwrap();
        let llr = qpsk_soft_demodulate(&s, 0.01).unwrap();
        assert!(llr[0] > 0.0 && llr[1] < 0.0);
        let origin = qpsk_soft_demodulate(&[Complex64::new(0.0, 0.0)], 1.0).unwrap();
        assert_eq!(origin, vec![0.0, 0.0]);
        let wide = qpsk_soft_demodulate(&s, 0.02).unwrap();
        assert!((llr[0] / wide[0] - 2.0).abs() < 1e-12);
        assert!(qpsk_soft_demodulate(&s, 0.0).is_err());
    }

    #[test]
    fn decide_snaps_to_constellation() {
        let h = FRAC_1_SQRT_2;
        assert_eq!(
            qpsk_decide(Complex64::new(0.1, -3.0)),
            Complex64::new(h, -h)
        );
    }
}
