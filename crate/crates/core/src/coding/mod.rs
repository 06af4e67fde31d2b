//! Channel coding chain: CRC-24 detection, K = 7 convolutional code,
//! 16-level soft Viterbi decoding.
//!
//! A packet carrying `d` QPSK symbols has `2d` coded bits. With the rate-1/2
//! code and its 6 tail bits that leaves `d − 6` bits for payload plus CRC,
//! so the payload is `d − 30` bits.

mod conv;
mod crc;
mod soft;

pub use conv::{conv_encode, viterbi_decode, ConvCode};
pub use crc::{crc24_bits, crc24_bytes, crc_append, crc_check, pack_bits, unpack_bits, CrcSpec};
pub use soft::{
    dequantize_soft, packet_clip, quantize_packet, quantize_soft, SoftBit, CLIP_SIGMAS, LEVELS,
};

use crate::error::{Error, Result};

const CRC_BITS: usize = 24;

/// Payload framing for one user block: payload → CRC → convolutional code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketCodec {
    code: ConvCode,
    symbols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedPacket {
    /// Payload bits (CRC stripped).
    pub payload: Vec<u8>,
    pub crc_ok: bool,
}

impl PacketCodec {
    /// Framing for a block of `symbols` QPSK symbols.
    pub fn new(code: ConvCode, symbols: usize) -> Result<Self> {
        let codec = PacketCodec { code, symbols };
        let overhead = CRC_BITS + code.tail_bits();
        if symbols <= overhead {
            return Err(Error::Codec(format!(
                "a block of {symbols} symbols cannot carry CRC and tail ({overhead} bits) plus payload"
            )));
        }
        Ok(codec)
    }

    pub fn for_block_len(symbols: usize) -> Result<Self> {
        Self::new(ConvCode::default(), symbols)
    }

    pub fn code(&self) -> &ConvCode {
        &self.code
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn payload_bits(&self) -> usize {
        self.symbols - CRC_BITS - self.code.tail_bits()
    }

    pub fn coded_bits(&self) -> usize {
        2 * self.symbols
    }

    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.len() != self.payload_bits() {
            return Err(Error::Dimension {
                expected: self.payload_bits(),
                got: payload.len(),
            });
        }
        self.code.encode(&crc_append(payload)?)
    }

    /// Quantizes the LLRs, decodes, and checks the CRC.
    pub fn decode(&self, llrs: &[f64]) -> Result<DecodedPacket> {
        if llrs.len() != self.coded_bits() {
            return Err(Error::Dimension {
                expected: self.coded_bits(),
                got: llrs.len(),
            });
        }
        let word = self.code.decode(&quantize_packet(llrs))?;
        let crc_ok = crc_check(&word);
        let mut payload = word;
        payload.truncate(self.payload_bits());
        Ok(DecodedPacket { payload, crc_ok })
    }
}
