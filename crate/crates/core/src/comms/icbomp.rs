//! Interference-cancelling BOMP.
//!
//! Block selection, least-squares refit and residual update follow BOMP.
//! After each refit every detected but undecoded user is demodulated and
//! passed through the soft Viterbi decoder. A user whose CRC passes is
//! re-encoded, its contribution `√ρ₀·B_n·ŝ_n` is subtracted from the working
//! observation, and it leaves the least-squares set for good. The remaining
//! set is then refit on the cleaned observation, and the residual energy of
//! that fit is what the stopping rule sees, with `l = |Λ|` blocks in the fit.
//!
//! Least squares uses the normal equations. The Gram blocks
//! `B_nᴴ B_m = (P_nᴴ P_m)(h_nᴴ h_m)` are cheap thanks to the Kronecker
//! structure, and the factor grows by one block per iteration.

use num_complex::Complex64;

use super::qpsk::{qpsk_decide, qpsk_modulate, qpsk_soft_demodulate};
use super::scenario::CommsInstance;
use crate::bomp::{best_block, StopReason};
use crate::coding::PacketCodec;
use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, IncrementalCholesky};
use crate::stopping::{should_stop, EnergyModel, StopInput, StoppingRule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedUser {
    pub user: usize,
    pub payload: Vec<u8>,
    /// Iteration at which the CRC first passed.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcbompResult {
    /// Users in decode order.
    pub decoded: Vec<DecodedUser>,
    /// Users still in the least-squares set when the loop ended.
    pub detected_not_decoded: Vec<usize>,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub thresholds: Vec<Option<f64>>,
    /// `|Λ|` after each iteration.
    pub active_trace: Vec<usize>,
    pub stop_reason: StopReason,
    /// Hard symbol decisions, `d` per user: re-encoded symbols for decoded
    /// users, sliced estimates for detected ones, zero otherwise.
    pub symbol_decisions: ComplexVector,
    /// Soft symbol estimates in the same layout.
    pub estimate_full: ComplexVector,
    /// `y` after all cancellations.
    pub working_observation: ComplexVector,
}

impl IcbompResult {
    pub fn decoded_users(&self) -> Vec<usize> {
        let mut users: Vec<usize> = self.decoded.iter().map(|u| u.user).collect();
        users.sort_unstable();
        users
    }

    /// Every user selected at some iteration, sorted.
    pub fn detected(&self) -> Vec<usize> {
        let mut users = self.decoded_users();
        users.extend_from_slice(&self.detected_not_decoded);
        users.sort_unstable();
        users
    }
}

pub fn run_icbomp(
    instance: &CommsInstance,
    codec: &PacketCodec,
    rule: &StoppingRule,
    guard: usize,
) -> Result<IcbompResult> {
    rule.validate()?;
    let p = instance.params;
    let d = p.block_len;
    let m = p.observations();
    if codec.symbols() != d {
        return Err(Error::Codec(format!(
            "codec frames {} symbols but blocks carry {d}",
            codec.symbols()
        )));
    }
    if guard == 0 || guard * d >= m {
        return Err(Error::Params(format!(
            "iteration guard {guard} must satisfy 1 <= guard and guard*d < M_ant*T = {m}"
        )));
    }
    let model = EnergyModel::Icbomp {
        antennas: p.antennas,
        slots: p.slots,
        block_len: d,
        rho0: p.rho0,
    };
    let gain = p.rho0.sqrt();

    let mut work = instance.y.clone();
    let mut residual = work.clone();
    let mut lambda: Vec<usize> = Vec::new();
    let mut taken: Vec<usize> = Vec::new();
    let mut chol = IncrementalCholesky::new();
    let mut decoded: Vec<DecodedUser> = Vec::new();
    let mut decisions = ComplexVector::zeros(p.users * d);
    let mut estimate_full = ComplexVector::zeros(p.users * d);
    let mut previous: Option<ComplexVector> = None;
    let mut energy_trace = Vec::new();
    let mut thresholds = Vec::new();
    let mut active_trace = Vec::new();
    let mut stop_reason = StopReason::Guard;
    let mut iterations = 0;

    for k in 1..=guard {
        let j = match best_block(&instance.correlate(&residual), &taken, d) {
            Ok(j) => j,
            Err(Error::Exhausted) => {
                stop_reason = StopReason::Exhausted;
                break;
            }
            Err(e) => return Err(e.at_iteration(k)),
        };
        iterations = k;
        chol.push_block(&cross_gram(instance, &lambda, j), &instance.gram(j, j))
            .map_err(|e| e.at_iteration(k))?;
        lambda.push(j);
        taken.push(j);

        let (coef, fit) = refit(instance, &chol, &lambda, &work).map_err(|e| e.at_iteration(k))?;
        let noise = (fit.norm_sqr() / (m - lambda.len() * d) as f64).max(f64::EPSILON);
        let soft = symbol_estimates(&coef, gain);
        store(&lambda, &soft, d, &mut estimate_full, &mut decisions);

        let mut passed = Vec::new();
        if gain > 0.0 {
            for (&n, s_hat) in lambda.iter().zip(soft.chunks_exact(d)) {
                let n0 = noise * d as f64 / (p.rho0 * instance.block_energy(n));
                let packet = qpsk_soft_demodulate(s_hat, n0)
                    .and_then(|llrs| codec.decode(&llrs))
                    .map_err(|e| e.at_iteration(k))?;
                if packet.crc_ok {
                    passed.push((n, packet.payload));
                }
            }
        }

        if passed.is_empty() {
            residual = fit;
        } else {
            for (n, payload) in passed {
                let symbols = codec
                    .encode(&payload)
                    .and_then(|bits| qpsk_modulate(&bits))
                    .map_err(|e| e.at_iteration(k))?;
                instance.accumulate_block(n, &symbols, Complex64::new(-gain, 0.0), &mut work);
                decisions[n * d..(n + 1) * d].copy_from_slice(&symbols);
                estimate_full[n * d..(n + 1) * d].copy_from_slice(&symbols);
                lambda.retain(|&u| u != n);
                decoded.push(DecodedUser {
                    user: n,
                    payload,
                    iteration: k,
                });
            }
            chol = factor(instance, &lambda).map_err(|e| e.at_iteration(k))?;
            let (coef, fit) =
                refit(instance, &chol, &lambda, &work).map_err(|e| e.at_iteration(k))?;
            store(
                &lambda,
                &symbol_estimates(&coef, gain),
                d,
                &mut estimate_full,
                &mut decisions,
            );
            residual = fit;
        }

        let energy = residual.norm_sqr();
        let decision = should_stop(
            rule,
            &model,
            &StopInput {
                iteration: k,
                active_blocks: lambda.len(),
                energy,
                previous: previous.as_deref(),
                current: &estimate_full,
            },
        )
        .map_err(|e| e.at_iteration(k))?;
        energy_trace.push(energy);
        thresholds.push(decision.threshold_used);
        active_trace.push(lambda.len());
        if decision.stop {
            stop_reason = StopReason::Rule(decision.rule);
            break;
        }
        previous = Some(estimate_full.clone());
    }

    Ok(IcbompResult {
        decoded,
        detected_not_decoded: {
            let mut rest = lambda;
            rest.sort_unstable();
            rest
        },
        iterations,
        energy_trace,
        thresholds,
        active_trace,
        stop_reason,
        symbol_decisions: decisions,
        estimate_full,
        working_observation: work,
    })
}

/// `B_Λᴴ B_j` stacked block by block, row-major.
fn cross_gram(instance: &CommsInstance, lambda: &[usize], j: usize) -> Vec<Complex64> {
    lambda
        .iter()
        .flat_map(|&n| instance.gram(n, j).as_slice().to_vec())
        .collect()
}

fn factor(instance: &CommsInstance, lambda: &[usize]) -> Result<IncrementalCholesky> {
    let mut chol = IncrementalCholesky::new();
    for (i, &n) in lambda.iter().enumerate() {
        chol.push_block(&cross_gram(instance, &lambda[..i], n), &instance.gram(n, n))?;
    }
    Ok(chol)
}

/// Least-squares coefficients over `lambda` and the explicit residual
/// `work − Σ B_n x_n`.
fn refit(
    instance: &CommsInstance,
    chol: &IncrementalCholesky,
    lambda: &[usize],
    work: &[Complex64],
) -> Result<(ComplexVector, ComplexVector)> {
    let d = instance.block_len();
    let rhs: Vec<Complex64> = lambda
        .iter()
        .flat_map(|&n| instance.correlate_block(n, work))
        .collect();
    let coef = chol.solve(&rhs)?;
    let mut residual: ComplexVector = work.to_vec().into();
    for (&n, x) in lambda.iter().zip(coef.chunks_exact(d)) {
        instance.accumulate_block(n, x, Complex64::new(-1.0, 0.0), &mut residual);
    }
    Ok((coef, residual))
}

/// Coefficients divided by `√ρ₀`; left as is when there is no signal.
fn symbol_estimates(coef: &[Complex64], gain: f64) -> Vec<Complex64> {
    if gain > 0.0 {
        coef.iter().map(|x| x / gain).collect()
    } else {
        coef.to_vec()
    }
}

fn store(
    lambda: &[usize],
    soft: &[Complex64],
    d: usize,
    estimate_full: &mut [Complex64],
    decisions: &mut [Complex64],
) {
    for (&n, s_hat) in lambda.iter().zip(soft.chunks_exact(d)) {
        estimate_full[n * d..(n + 1) * d].copy_from_slice(s_hat);
        for (out, &s) in decisions[n * d..(n + 1) * d].iter_mut().zip(s_hat) {
            *out = qpsk_decide(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::{generate_comms_instance, CommsParams};
    use crate::numerics::{ComplexMatrix, Rng};
    use crate::stopping::ThresholdParams;

    fn params(rho0: f64) -> CommsParams {
        CommsParams {
            users: 8,
            active: 2,
            block_len: 32,
            antennas: 2,
            slots: 64,
            rho0,
        }
    }

    #[test]
    fn noiseless_high_snr_decodes_both_users_in_two_iterations() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let mut inst = generate_comms_instance(params(1e6), &codec, &mut Rng::new(21)).unwrap();
        let gain = inst.params.rho0.sqrt();
        inst.z = ComplexVector::zeros(inst.z.len());
        let mut y = ComplexVector::zeros(inst.z.len());
        for &n in &inst.active.clone() {
            let s = inst.user_symbols(n).to_vec();
            inst.accumulate_block(n, &s, Complex64::new(gain, 0.0), &mut y);
        }
        inst.y = y;
        let rule = StoppingRule::DerivedThreshold(ThresholdParams::default());
        let out = run_icbomp(&inst, &codec, &rule, 3).unwrap();
        assert_eq!(out.iterations, 2);
        assert_eq!(out.decoded_users(), inst.active);
        assert!(out.detected_not_decoded.is_empty());
        for u in &out.decoded {
            let idx = inst.active.iter().position(|&a| a == u.user).unwrap();
            assert_eq!(u.payload, inst.payloads[idx]);
        }
        let y_norm = inst.y.norm_sqr();
        assert!(*out.energy_trace.last().unwrap() < 1e-20 * y_norm);
    }

    #[test]
    fn max_iterations_runs_to_the_cap() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(params(10.0), &codec, &mut Rng::new(2)).unwrap();
        let out = run_icbomp(&inst, &codec, &StoppingRule::MaxIterations(3), 3).unwrap();
        assert_eq!(out.iterations, 3);
        assert_eq!(out.energy_trace.len(), 3);
        assert_eq!(
            out.stop_reason,
            StopReason::Rule(crate::stopping::RuleTag::MaxIterations)
        );
    }

    #[test]
    fn guard_and_codec_are_checked() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(params(1.0), &codec, &mut Rng::new(2)).unwrap();
        let rule = StoppingRule::MaxIterations(2);
        assert!(run_icbomp(&inst, &codec, &rule, 0).is_err());
        assert!(run_icbomp(&inst, &codec, &rule, 4).is_err());
        let other = PacketCodec::for_block_len(40).unwrap();
        assert!(run_icbomp(&inst, &other, &rule, 2).is_err());
    }

    #[test]
    fn cholesky_refit_matches_dense_least_squares() {
        let codec = PacketCodec::for_block_len(32).unwrap();
        let inst = generate_comms_instance(params(1.0), &codec, &mut Rng::new(9)).unwrap();
        let lambda = [3, 0, 6];
        let chol = factor(&inst, &lambda).unwrap();
        let (coef, _) = refit(&inst, &chol, &lambda, &inst.y).unwrap();
        let blocks: Vec<ComplexMatrix> = lambda.iter().map(|&n| inst.block(n)).collect();
        let refs: Vec<&ComplexMatrix> = blocks.iter().collect();
        let dense = crate::numerics::least_squares(&ComplexMatrix::hstack(&refs).unwrap(), &inst.y)
            .unwrap();
        for (a, b) in coef.iter().zip(dense.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
