//! CRC-24 error detection.
//!
//! Generator 0x864CFB (x²⁴ + x²³ + x¹⁸ + x¹⁷ + x¹⁴ + x¹¹ + x¹⁰ + x⁷ + x⁶ + x⁵ +
//! x⁴ + x³ + x + 1), zero initial register, no reflection, no final XOR.
//! Messages are bit sequences (one bit per byte, MSB first), so lengths need
//! not be multiples of eight. A byte-wise table implementation is provided
//! for packed octets and must agree with the bit-serial one.

use crate::error::{Error, Result};

/// Parameters of a non-reflected CRC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrcSpec {
    pub width: u32,
    /// Generator without its leading x^width term.
    pub poly: u32,
    pub init: u32,
    pub xor_out: u32,
}

impl CrcSpec {
    pub const CRC24: CrcSpec = CrcSpec {
        width: 24,
        poly: 0x86_4CFB,
        init: 0,
        xor_out: 0,
    };

    fn mask(&self) -> u32 {
        (1u32 << self.width) - 1
    }

    /// Bit-serial register update over 0/1 bits.
    pub fn checksum_bits(&self, bits: &[u8]) -> u32 {
        let mask = self.mask();
        let top = self.width - 1;
        let mut reg = self.init & mask;
        for &b in bits {
            let feedback = ((reg >> top) & 1) ^ u32::from(b & 1);
            reg = (reg << 1) & mask;
            if feedback == 1 {
                reg ^= self.poly;
            }
        }
        (reg ^ self.xor_out) & mask
    }
}

const fn crc24_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg = (i as u32) << 16;
        let mut bit = 0;
        while bit < 8 {
            reg = if reg & 0x80_0000 != 0 {
                ((reg << 1) ^ CrcSpec::CRC24.poly) & 0xFF_FFFF
            } else {
                (reg << 1) & 0xFF_FFFF
            };
            bit += 1;
        }
        table[i] = reg;
        i += 1;
    }
    table
}

static CRC24_TABLE: [u32; 256] = crc24_table();

/// CRC-24 over packed octets, table driven.
pub fn crc24_bytes(bytes: &[u8]) -> u32 {
    bytes.iter().fold(0u32, |reg, &byte| {
        let idx = (((reg >> 16) as u8) ^ byte) as usize;
        ((reg << 8) ^ CRC24_TABLE[idx]) & 0xFF_FFFF
    })
}

/// CRC-24 over a 0/1 bit sequence.
pub fn crc24_bits(bits: &[u8]) -> u32 {
    CrcSpec::CRC24.checksum_bits(bits)
}

/// Message followed by its 24 check bits, MSB first.
pub fn crc_append(bits: &[u8]) -> Result<Vec<u8>> {
    if bits.is_empty() {
        return Err(Error::Codec("CRC of an empty message".into()));
    }
    let crc = crc24_bits(bits);
    let mut out = Vec::with_capacity(bits.len() + 24);
    out.extend_from_slice(bits);
    out.extend((0..24).rev().map(|i| ((crc >> i) & 1) as u8));
    Ok(out)
}

/// True iff the word (message plus check bits) leaves a zero remainder.
pub fn crc_check(word: &[u8]) -> bool {
    word.len() > 24 && crc24_bits(word) == 0
}

/// Packs 0/1 bits into octets, MSB first; the last octet is zero padded.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

/// Unpacks the first `n_bits` bits of `bytes`, MSB first.
pub fn unpack_bits(bytes: &[u8], n_bits: usize) -> Vec<u8> {
    (0..n_bits)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect()
}
