//! Rate-1/2 feedforward convolutional code with zero-tail termination and
//! its soft-decision Viterbi decoder.
//!
//! The shift register holds the `K − 1` most recent inputs with the newest
//! at the top bit. For each input `b` the full register is
//! `reg = b << (K−1) | state`, the two outputs are the parities of `reg`
//! masked by each generator, and the next state is `reg >> 1`. With the
//! default generators (133, 171 octal) this is the familiar K = 7 code with
//! free distance 10.

use super::soft::SoftBit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCode {
    constraint_length: u32,
    generators: [u32; 2],
}

impl Default for ConvCode {
    fn default() -> Self {
        ConvCode {
            constraint_length: 7,
            generators: [0o133, 0o171],
        }
    }
}

impl ConvCode {
    /// Rate-1/2 code; supports constraint lengths 2 through 7.
    pub fn new(constraint_length: u32, generators: [u32; 2]) -> Result<Self> {
        if !(2..=7).contains(&constraint_length) {
            return Err(Error::Codec(format!(
                "constraint length {constraint_length} outside 2..=7"
            )));
        }
        let limit = 1u32 << constraint_length;
        if generators.iter().any(|&g| g == 0 || g >= limit) {
            return Err(Error::Codec(format!(
                "generators ({:o}, {:o}) do not fit constraint length {constraint_length}",
                generators[0], generators[1]
            )));
        }
        Ok(ConvCode {
            constraint_length,
            generators,
        })
    }

    pub fn constraint_length(&self) -> u32 {
        self.constraint_length
    }

    pub fn generators(&self) -> [u32; 2] {
        self.generators
    }

    pub fn tail_bits(&self) -> usize {
        self.constraint_length as usize - 1
    }

    /// Coded length for `info_len` input bits: `2(L + K − 1)`.
    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.tail_bits())
    }

    fn n_states(&self) -> usize {
        1 << (self.constraint_length - 1)
    }

    #[inline]
    fn outputs(&self, reg: u32) -> (u8, u8) {
        (
            ((reg & self.generators[0]).count_ones() & 1) as u8,
            ((reg & self.generators[1]).count_ones() & 1) as u8,
        )
    }

    /// Encodes 0/1 bits, appending `K − 1` zero tail bits.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.is_empty() {
            return Err(Error::Codec("cannot encode an empty message".into()));
        }
        let shift = self.constraint_length - 1;
        let mut state = 0u32;
        let mut out = Vec::with_capacity(self.coded_len(info.len()));
        let tail = std::iter::repeat_n(0u8, self.tail_bits());
        for b in info.iter().copied().chain(tail) {
            let reg = (u32::from(b & 1) << shift) | state;
            let (c0, c1) = self.outputs(reg);
            out.push(c0);
            out.push(c1);
            state = reg >> 1;
        }
        Ok(out)
    }

    /// Maximum-likelihood decoding of a zero-tailed codeword from quantized
    /// soft bits. Returns the information bits with the tail removed.
    ///
    /// Branch metrics correlate the signed soft value `2·level − 15` with the
    /// expected code bit; survivors are chosen by larger metric with ties
    /// resolved toward the predecessor whose oldest bit is 0.
    pub fn decode(&self, soft: &[SoftBit]) -> Result<Vec<u8>> {
        let tail = self.tail_bits();
        if !soft.len().is_multiple_of(2) || soft.len() <= 2 * tail {
            return Err(Error::Codec(format!(
                "coded length {} is not 2(L + {tail}) for any L >= 1",
                soft.len()
            )));
        }
        let steps = soft.len() / 2;
        let n_states = self.n_states();
        let shift = self.constraint_length - 1;
        let state_mask = (n_states - 1) as u32;

        // correlation of each 2-bit branch label with the received pair
        let out_table: Vec<(u8, u8)> = (0..(1u32 << self.constraint_length))
            .map(|reg| self.outputs(reg))
            .collect();

        const NEG: i32 = i32::MIN / 4;
        let mut metric = vec![NEG; n_states];
        metric[0] = 0;
        let mut next = vec![NEG; n_states];
        let mut decisions: Vec<u64> = Vec::with_capacity(steps);

        for pair in soft.chunks_exact(2) {
            let u0 = pair[0].signed();
            let u1 = pair[1].signed();
            let branch = |reg: u32| -> i32 {
                let (c0, c1) = out_table[reg as usize];
                (if c0 == 1 { u0 } else { -u0 }) + (if c1 == 1 { u1 } else { -u1 })
            };
            let mut decided = 0u64;
            for ns in 0..n_states as u32 {
                let b = ns >> (shift - 1);
                let base = (ns << 1) & state_mask;
                let mut best = NEG;
                let mut pick = 0u32;
                for x in 0..2u32 {
                    let s = base | x;
                    if metric[s as usize] == NEG {
                        continue;
                    }
                    let reg = (b << shift) | s;
                    let cand = metric[s as usize] + branch(reg);
                    if best == NEG || cand > best {
                        best = cand;
                        pick = x;
                    }
                }
                next[ns as usize] = best;
                decided |= u64::from(pick) << ns;
            }
            decisions.push(decided);
            std::mem::swap(&mut metric, &mut next);
        }

        let mut state = 0u32;
        let mut bits = vec![0u8; steps];
        for (t, decided) in decisions.iter().enumerate().rev() {
            bits[t] = (state >> (shift - 1)) as u8;
            let x = ((decided >> state) & 1) as u32;
            state = ((state << 1) & state_mask) | x;
        }
        bits.truncate(steps - tail);
        Ok(bits)
    }
}

/// Encodes with the default K = 7 (133, 171) code.
pub fn conv_encode(info: &[u8]) -> Result<Vec<u8>> {
    ConvCode::default().encode(info)
}

/// Decodes with the default K = 7 (133, 171) code.
pub fn viterbi_decode(soft: &[SoftBit]) -> Result<Vec<u8>> {
    ConvCode::default().decode(soft)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hard(bits: &[u8]) -> Vec<SoftBit> {
        bits.iter().map(|&b| SoftBit::saturated(b)).collect()
    }

    #[test]
    fn zero_input_gives_zero_codeword() {
        let out = conv_encode(&[0; 20]).unwrap();
        assert_eq!(out.len(), 2 * 26);
        assert!(out.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_interleaves_generators() {
        // 133 = 1011011, 171 = 1111001, newest tap first
        let out = conv_encode(&[1, 0, 0, 0]).unwrap();
        let g0 = [1, 0, 1, 1, 0, 1, 1];
        let g1 = [1, 1, 1, 1, 0, 0, 1];
        let expected: Vec<u8> = g0.iter().zip(&g1).flat_map(|(&a, &b)| [a, b]).collect();
        assert_eq!(&out[..14], expected.as_slice());
        assert!(out[14..].iter().all(|&b| b == 0));
    }

    #[test]
    fn clean_round_trip() {
        let msg = [1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 1, 0];
        let coded = conv_encode(&msg).unwrap();
        assert_eq!(viterbi_decode(&hard(&coded)).unwrap(), msg);
    }

    #[test]
    fn bad_lengths_rejected() {
        assert!(viterbi_decode(&hard(&[0; 13])).is_err());
        assert!(viterbi_decode(&hard(&[0; 12])).is_err());
        assert!(conv_encode(&[]).is_err());
        assert!(ConvCode::new(8, [0o133, 0o171]).is_err());
        assert!(ConvCode::new(3, [0o7, 0o10]).is_err());
    }

    #[test]
    fn short_code_round_trip() {
        let code = ConvCode::new(3, [0o7, 0o5]).unwrap();
        let msg = [1, 0, 1, 1, 0, 1];
        let coded = code.encode(&msg).unwrap();
        assert_eq!(coded.len(), code.coded_len(6));
        assert_eq!(code.decode(&hard(&coded)).unwrap(), msg);
    }
}
