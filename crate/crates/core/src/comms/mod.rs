//! Multiuser uplink with Kronecker-structured user blocks and the
//! interference-cancelling BOMP receiver.

mod icbomp;
mod qpsk;
mod scenario;

pub use icbomp::{run_icbomp, DecodedUser, IcbompResult};
pub use qpsk::{qpsk_decide, qpsk_hard_demodulate, qpsk_modulate, qpsk_soft_demodulate};
pub use scenario::{generate_comms_instance, kron_block, CommsInstance, CommsParams};
