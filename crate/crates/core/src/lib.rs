//! Greedy block-sparse recovery with residual-energy stopping rules.
//!
//! * [`numerics`]: complex least squares, the normal quantile, seeded sampling
//! * [`model`]: block-sparse problem instances `y = B s + z`
//! * [`stopping`]: residual-energy statistics, thresholds and stopping rules
//! * [`bomp`]: block orthogonal matching pursuit
//! * [`coding`]: convolutional code, soft Viterbi decoder, CRC-24
//! * [`comms`]: multiuser uplink scenario and interference-cancelling BOMP
//! * [`harness`]: Monte Carlo sweeps, metrics and CSV output

pub mod bomp;
pub mod coding;
pub mod comms;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod stopping;

pub use error::{Error, Result};
