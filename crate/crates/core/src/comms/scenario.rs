use num_complex::Complex64;
use rand::seq::SliceRandom;

use super::qpsk::qpsk_modulate;
use crate::coding::PacketCodec;
use crate::error::{Error, Result};
use crate::numerics::{dot_conj, ComplexMatrix, ComplexVector, Rng};

/// Uplink with `N` users, `N_a` of them active, each sending a block of `d`
/// QPSK symbols through a `T × d` precoder and an `M_ant`-antenna channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommsParams {
    pub users: usize,
    pub active: usize,
    pub block_len: usize,
    pub antennas: usize,
    pub slots: usize,
    /// Linear SNR ρ₀.
    pub rho0: f64,
}

impl CommsParams {
    pub fn validate(&self) -> Result<()> {
        if self.active == 0 || self.active > self.users {
            return Err(Error::Params(format!(
                "active users N_a = {} must satisfy 1 <= N_a <= N = {}",
                self.active, self.users
            )));
        }
        if self.block_len == 0 || self.antennas == 0 {
            return Err(Error::Params(
                "block length and antenna count must be positive".into(),
            ));
        }
        if self.slots < self.block_len {
            return Err(Error::Params(format!(
                "T = {} must be at least d = {}",
                self.slots, self.block_len
            )));
        }
        if !(self.rho0 >= 0.0 && self.rho0.is_finite()) {
            return Err(Error::Params(format!(
                "SNR rho0 = {} must be finite and >= 0",
                self.rho0
            )));
        }
        Ok(())
    }

    /// Observation length `M_ant · T`.
    pub fn observations(&self) -> usize {
        self.antennas * self.slots
    }

    /// Shape of the stacked matrix `B = [B_1 … B_N]`.
    pub fn matrix_dims(&self) -> (usize, usize) {
        (self.observations(), self.users * self.block_len)
    }
}

/// `P ⊗ h` for a `T × d` precoder and an `M_ant` channel: entry
/// `(t·M_ant + m, c)` is `P[t, c] · h[m]`.
pub fn kron_block(p: &ComplexMatrix, h: &[Complex64]) -> ComplexMatrix {
    let m_ant = h.len();
    ComplexMatrix::from_fn(p.rows() * m_ant, p.cols(), |row, c| {
        p.get(row / m_ant, c) * h[row % m_ant]
    })
}

#[derive(Debug, Clone)]
pub struct CommsInstance {
    pub params: CommsParams,
    pub precoders: Vec<ComplexMatrix>,
    pub channels: Vec<ComplexVector>,
    /// Sorted indices of active users.
    pub active: Vec<usize>,
    /// Payload bits, aligned with `active`.
    pub payloads: Vec<Vec<u8>>,
    /// Transmitted symbols, `d` per user, zero for inactive users.
    pub s: ComplexVector,
    pub z: ComplexVector,
    pub y: ComplexVector,
    block_energy: Vec<f64>,
}

pub fn generate_comms_instance(
    params: CommsParams,
    codec: &PacketCodec,
    rng: &mut Rng,
) -> Result<CommsInstance> {
    params.validate()?;
    if codec.symbols() != params.block_len {
        return Err(Error::Codec(format!(
            "codec frames {} symbols but blocks carry {}",
            codec.symbols(),
            params.block_len
        )));
    }
    let (d, t, m_ant) = (params.block_len, params.slots, params.antennas);
    let p_var = 1.0 / t as f64;
    let mut precoders = Vec::with_capacity(params.users);
    let mut channels = Vec::with_capacity(params.users);
    for _ in 0..params.users {
        precoders.push(ComplexMatrix::from_fn(t, d, |_, _| {
            rng.complex_gaussian(p_var)
        }));
        channels.push(
            (0..m_ant)
                .map(|_| rng.complex_gaussian(1.0))
                .collect::<ComplexVector>(),
        );
    }

    let mut users: Vec<usize> = (0..params.users).collect();
    let (chosen, _) = users.partial_shuffle(rng, params.active);
    let mut active = chosen.to_vec();
    active.sort_unstable();

    let mut s = ComplexVector::zeros(params.users * d);
    let mut payloads = Vec::with_capacity(active.len());
    for &n in &active {
        let payload = rng.bits(codec.payload_bits());
        let symbols = qpsk_modulate(&codec.encode(&payload)?)?;
        s[n * d..(n + 1) * d].copy_from_slice(&symbols);
        payloads.push(payload);
    }
    let z: ComplexVector = (0..params.observations())
        .map(|_| rng.complex_gaussian(1.0))
        .collect();

    let block_energy = precoders
        .iter()
        .zip(&channels)
        .map(|(p, h)| p.as_slice().iter().map(|v| v.norm_sqr()).sum::<f64>() * h.norm_sqr())
        .collect();
    let mut inst = CommsInstance {
        params,
        precoders,
        channels,
        active,
        payloads,
        s,
        y: z.clone(),
        z,
        block_energy,
    };
    let gain = params.rho0.sqrt();
    let mut signal = ComplexVector::zeros(params.observations());
    for &n in &inst.active {
        inst.accumulate_block(
            n,
            &inst.s[n * d..(n + 1) * d],
            Complex64::new(1.0, 0.0),
            &mut signal,
        );
    }
    for (yi, si) in inst.y.iter_mut().zip(signal.iter()) {
        *yi += gain * si;
    }
    Ok(inst)
}

impl CommsInstance {
    pub fn block_len(&self) -> usize {
        self.params.block_len
    }

    /// Dense `B_n = P_n ⊗ h_n`.
    pub fn block(&self, n: usize) -> ComplexMatrix {
        kron_block(&self.precoders[n], &self.channels[n])
    }

    /// `‖B_n‖_F²`.
    pub fn block_energy(&self, n: usize) -> f64 {
        self.block_energy[n]
    }

    /// Transmitted symbols of user `n`.
    pub fn user_symbols(&self, n: usize) -> &[Complex64] {
        let d = self.block_len();
        &self.s[n * d..(n + 1) * d]
    }

    /// `out += scale · B_n x`, using `(P ⊗ h) x = (P x) ⊗ h`.
    pub fn accumulate_block(
        &self,
        n: usize,
        x: &[Complex64],
        scale: Complex64,
        out: &mut [Complex64],
    ) {
        let p = &self.precoders[n];
        let h = &self.channels[n];
        let m_ant = h.len();
        for t in 0..p.rows() {
            let px = p
                .row(t)
                .iter()
                .zip(x)
                .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                * scale;
            for (o, hm) in out[t * m_ant..(t + 1) * m_ant].iter_mut().zip(h.iter()) {
                *o += px * hm;
            }
        }
    }

    /// `B_nᴴ B_m = (P_nᴴ P_m)(h_nᴴ h_m)`.
    pub fn gram(&self, n: usize, m: usize) -> ComplexMatrix {
        let d = self.block_len();
        let (pn, pm) = (&self.precoders[n], &self.precoders[m]);
        let scale = dot_conj(&self.channels[n], &self.channels[m]);
        let mut g = vec![Complex64::new(0.0, 0.0); d * d];
        for t in 0..pn.rows() {
            let (rn, rm) = (pn.row(t), pm.row(t));
            for (i, a) in rn.iter().enumerate() {
                let a = a.conj();
                for (gij, b) in g[i * d..(i + 1) * d].iter_mut().zip(rm) {
                    *gij += a * b;
                }
            }
        }
        g.iter_mut().for_each(|v| *v *= scale);
        ComplexMatrix::new(d, d, g).expect("d x d buffer")
    }

    /// `B_nᴴ r`.
    pub fn correlate_block(&self, n: usize, r: &[Complex64]) -> Vec<Complex64> {
        let m_ant = self.params.antennas;
        let h = &self.channels[n];
        let p = &self.precoders[n];
        let mut out = vec![Complex64::new(0.0, 0.0); self.block_len()];
        for t in 0..p.rows() {
            let u = dot_conj(h, &r[t * m_ant..(t + 1) * m_ant]);
            for (o, pc) in out.iter_mut().zip(p.row(t)) {
                *o += pc.conj() * u;
            }
        }
        out
    }

    /// `Bᴴ r` for all users at once, `d` entries per user. Uses
    /// `(P ⊗ h)ᴴ r = Pᴴ u` with `u_t = hᴴ r_t`.
    pub fn correlate(&self, r: &[Complex64]) -> Vec<Complex64> {
        (0..self.params.users)
            .flat_map(|n| self.correlate_block(n, r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_of_row_and_column() {
        let p = ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let k = kron_block(&p, &[c(3.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(k.rows(), 2);
        assert_eq!(k.row(0), &[c(3.0, 0.0), c(6.0, 0.0)]);
        assert_eq!(k.row(1), &[c(4.0, 0.0), c(8.0, 0.0)]);
    }

    #[test]
    fn kron_of_identity_stacks_channel_diagonally() {
        let h = [c(1.0, 1.0), c(0.0, -2.0), c(0.5, 0.0)];
        let k = kron_block(&ComplexMatrix::identity(2), &h);
        assert_eq!(k.rows(), 6);
        for row in 0..6 {
            for col in 0..2 {
                let expected = if row / 3 == col {
                    h[row % 3]
                } else {
                    c(0.0, 0.0)
                };
                assert_eq!(k.get(row, col), expected);
            }
        }
    }

    fn small_params(rho0: f64) -> CommsParams {
        CommsParams {
            users: 6,
            active: 2,
            block_len: 32,
            antennas: 2,
            slots: 40,
            rho0,
        }
    }

    #[test]
    fn structured_products_match_dense_blocks() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(small_params(2.0), &codec, &mut Rng::new(4)).unwrap();
        let mut rng = Rng::new(5);
        let r: Vec<_> = (0..80).map(|_| rng.complex_gaussian(1.0)).collect();
        let corr = inst.correlate(&r);
        for n in 0..6 {
            let dense = inst.block(n).adjoint_mul_vec(&r).unwrap();
            for (a, b) in corr[n * 32..(n + 1) * 32].iter().zip(dense.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            let x: Vec<_> = (0..32).map(|_| rng.complex_gaussian(1.0)).collect();
            let mut out = vec![c(0.0, 0.0); 80];
            inst.accumulate_block(n, &x, c(1.0, 0.0), &mut out);
            let dense = inst.block(n).mul_vec(&x).unwrap();
            for (a, b) in out.iter().zip(dense.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            let m = (n + 1) % 6;
            let dense = inst.block(n).adjoint().matmul(&inst.block(m)).unwrap();
            let g = inst.gram(n, m);
            for (a, b) in g.as_slice().iter().zip(dense.as_slice()) {
                assert!((a - b).norm() < 1e-12);
            }
            let fro: f64 = inst.block(n).as_slice().iter().map(|v| v.norm_sqr()).sum();
            assert!((fro - inst.block_energy(n)).abs() < 1e-10 * fro);
        }
    }

    #[test]
    fn zero_snr_observes_only_noise() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(small_params(0.0), &codec, &mut Rng::new(8)).unwrap();
        assert_eq!(inst.y, inst.z);
    }

    #[test]
    fn symbols_are_unit_energy_and_inactive_blocks_zero() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(small_params(1.0), &codec, &mut Rng::new(2)).unwrap();
        for n in 0..6 {
            let active = inst.active.contains(&n);
            for v in inst.user_symbols(n) {
                if active {
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                } else {
                    assert_eq!(v.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn parameter_checks() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let bad = [
            CommsParams {
                active: 0,
                ..small_params(1.0)
            },
            CommsParams {
                active: 7,
                ..small_params(1.0)
            },
            CommsParams {
                slots: 31,
                ..small_params(1.0)
            },
            CommsParams {
                rho0: -1.0,
                ..small_params(1.0)
            },
        ];
        for p in bad {
            assert!(
                generate_comms_instance(p, &codec, &mut Rng::new(1)).is_err(),
                "{p:?}"
            );
        }
        let other = PacketCodec::for_block_len(40).unwrap();
        assert!(generate_comms_instance(small_params(1.0), &other, &mut Rng::new(1)).is_err());
    }
}
