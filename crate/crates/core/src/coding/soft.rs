//! 16-level soft-bit quantization.
//!
//! Levels run from 0 (confident 0) to 15 (confident 1). LLRs follow the
//! convention `log P(b=0)/P(b=1)`, so a positive LLR maps to a low level.
//! The quantizer is uniform mid-rise over `[−clip, clip]` with step
//! `clip / 8`: an LLR of exactly 0 sits on the boundary between levels 7
//! and 8 and is assigned level 7.

/// Number of quantization levels.
pub const LEVELS: u8 = 16;

/// Clipping range in units of the per-packet LLR spread.
pub const CLIP_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SoftBit(u8);

impl SoftBit {
    pub fn new(level: u8) -> Option<Self> {
        (level < LEVELS).then_some(SoftBit(level))
    }

    /// Most confident level for a hard bit.
    pub fn saturated(bit: u8) -> Self {
        SoftBit(if bit & 1 == 1 { LEVELS - 1 } else { 0 })
    }

    pub fn level(&self) -> u8 {
        self.0
    }

    pub fn hard(&self) -> u8 {
        u8::from(self.0 >= LEVELS / 2)
    }

    /// Odd integer in `[−15, 15]`, positive toward bit 1.
    pub fn signed(&self) -> i32 {
        2 * i32::from(self.0) - i32::from(LEVELS - 1)
    }

    /// Distance from the decision boundary, 1 through 15.
    pub fn reliability(&self) -> u8 {
        self.signed().unsigned_abs() as u8
    }
}

/// Quantizes one LLR with clipping range `±clip`.
pub fn quantize_soft(llr: f64, clip: f64) -> SoftBit {
    if clip.is_nan() || clip <= 0.0 || !llr.is_finite() {
        return match llr {
            l if l > 0.0 => SoftBit(0),
            l if l < 0.0 => SoftBit(LEVELS - 1),
            _ => SoftBit(LEVELS / 2 - 1),
        };
    }
    let step = 2.0 * clip / f64::from(LEVELS);
    let idx = (f64::from(LEVELS / 2 - 1) - (llr / step).floor()).clamp(0.0, f64::from(LEVELS - 1));
    SoftBit(idx as u8)
}

/// Centre of a level's quantization cell, as an LLR.
pub fn dequantize_soft(bit: SoftBit, clip: f64) -> f64 {
    let step = 2.0 * clip / f64::from(LEVELS);
    (f64::from(LEVELS / 2) - 0.5 - f64::from(bit.0)) * step
}

/// Clipping range for a packet: `CLIP_SIGMAS` times the RMS LLR.
pub fn packet_clip(llrs: &[f64]) -> f64 {
    if llrs.is_empty() {
        return 0.0;
    }
    let ms = llrs.iter().map(|l| l * l).sum::<f64>() / llrs.len() as f64;
    CLIP_SIGMAS * ms.sqrt()
}

/// Quantizes a packet's LLRs against its own spread.
pub fn quantize_packet(llrs: &[f64]) -> Vec<SoftBit> {
    let clip = packet_clip(llrs);
    llrs.iter().map(|&l| quantize_soft(l, clip)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_level_seven() {
        assert_eq!(quantize_soft(0.0, 3.0).level(), 7);
        assert_eq!(quantize_soft(-1e-12, 3.0).level(), 8);
    }

    #[test]
    fn saturates_outside_range() {
        assert_eq!(quantize_soft(100.0, 3.0).level(), 0);
        assert_eq!(quantize_soft(-100.0, 3.0).level(), 15);
        assert_eq!(quantize_soft(3.0, 3.0).level(), 0);
    }

    #[test]
    fn sign_matches_hard_decision() {
        assert_eq!(quantize_soft(0.4, 3.0).hard(), 0);
        assert_eq!(quantize_soft(-0.4, 3.0).hard(), 1);
        assert_eq!(SoftBit::saturated(1).signed(), 15);
        assert_eq!(SoftBit::saturated(0).signed(), -15);
        assert_eq!(SoftBit::new(7).unwrap().reliability(), 1);
        assert!(SoftBit::new(16).is_none());
    }

    #[test]
    fn degenerate_clip_keeps_sign() {
        assert_eq!(quantize_packet(&[0.0, 0.0]), vec![SoftBit(7), SoftBit(7)]);
        assert_eq!(quantize_soft(2.0, 0.0).hard(), 0);
        assert_eq!(quantize_soft(-2.0, 0.0).hard(), 1);
    }
}
