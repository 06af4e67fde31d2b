//! Block orthogonal matching pursuit.
//!
//! Each iteration picks the block most correlated with the residual, refits
//! all selected blocks by least squares, updates the residual and asks the
//! stopping rule whether to continue. The rule is consulted only after an
//! iteration completes, never before the first selection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{block_columns, ProblemInstance};
use crate::numerics::{ComplexMatrix, ComplexVector, IncrementalQr};
use crate::stopping::{should_stop, EnergyModel, RuleTag, StopInput, StoppingRule};

/// Iteration cap used when the caller has no better one: 30, or fewer if
/// the least-squares fit would run out of rows.
pub fn default_guard(measurements: usize, block_len: usize) -> usize {
    30.min(measurements.saturating_sub(1) / block_len.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub k: usize,
    /// Detected blocks in selection order.
    pub lambda: Vec<usize>,
    pub residual: ComplexVector,
    /// Least-squares coefficients, `d` per entry of `lambda`.
    pub estimate: ComplexVector,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Rule(RuleTag),
    /// The iteration guard was reached before the rule fired.
    Guard,
    /// No unselected block was left.
    Exhausted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Rule(tag) => tag.as_str(),
            StopReason::Guard => "guard",
            StopReason::Exhausted => "exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Estimate of the whole signal, zero outside the detected blocks.
    pub estimate_full: ComplexVector,
    pub lambda: Vec<usize>,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    /// Threshold compared against at each iteration, for energy-based rules.
    pub thresholds: Vec<Option<f64>>,
    pub stop_reason: StopReason,
}

/// Block maximizing `‖B_jᴴ r‖²` over blocks not in `excluded`; ties go to
/// the lowest index.
pub fn select_block(
    b: &ComplexMatrix,
    residual: &[Complex64],
    excluded: &[usize],
    d: usize,
) -> Result<usize> {
    if d == 0 || !b.cols().is_multiple_of(d) {
        return Err(Error::Params(format!(
            "block length {d} does not divide the column count {}",
            b.cols()
        )));
    }
    let correlation = b.adjoint_mul_vec(residual)?;
    best_block(&correlation, excluded, d)
}

/// Argmax of per-block energy of an already computed correlation vector.
pub(crate) fn best_block(correlation: &[Complex64], excluded: &[usize], d: usize) -> Result<usize> {
    let n_blocks = correlation.len() / d;
    let mut taken = vec![false; n_blocks];
    for &j in excluded {
        if j >= n_blocks {
            return Err(Error::IndexOutOfRange {
                index: j,
                limit: n_blocks,
            });
        }
        taken[j] = true;
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, chunk) in correlation.chunks_exact(d).enumerate() {
        if taken[j] {
            continue;
        }
        let score: f64 = chunk.iter().map(|v| v.norm_sqr()).sum();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::Exhausted)
}

pub fn run_bomp(
    instance: &ProblemInstance,
    rule: &StoppingRule,
    guard: usize,
) -> Result<RecoveryResult> {
    run_bomp_observed(instance, rule, guard, |_| {})
}

/// [`run_bomp`] with a callback receiving the state after every iteration.
pub fn run_bomp_observed(
    instance: &ProblemInstance,
    rule: &StoppingRule,
    guard: usize,
    mut observer: impl FnMut(&IterationState),
) -> Result<RecoveryResult> {
    rule.validate()?;
    let p = &instance.params;
    let (m, d) = (p.measurements, p.block_len);
    if guard == 0 || guard * d >= m {
        return Err(Error::Params(format!(
            "iteration guard {guard} must satisfy 1 <= guard and guard*d < M = {m}"
        )));
    }
    let model = EnergyModel::Bomp {
        measurements: m,
        block_len: d,
        sigma2: p.sigma2,
    };
    let b = &instance.b;
    let y = &instance.y;

    let mut lambda: Vec<usize> = Vec::new();
    let mut qr = IncrementalQr::new(m);
    let mut residual = y.clone();
    let mut previous: Option<ComplexVector> = None;
    let mut energy_trace = Vec::new();
    let mut thresholds = Vec::new();
    let mut stop_reason = StopReason::Guard;
    let mut estimate_full = ComplexVector::zeros(p.signal_len());

    for k in 1..=guard {
        let (coef, new_residual) = match advance(b, y, &mut lambda, &mut qr, &residual, d) {
            Ok(v) => v,
            Err(Error::Exhausted) => {
                stop_reason = StopReason::Exhausted;
                break;
            }
            Err(e) => return Err(e.at_iteration(k)),
        };
        residual = new_residual;
        let energy = residual.norm_sqr();

        let mut full = ComplexVector::zeros(p.signal_len());
        for (&j, chunk) in lambda.iter().zip(coef.chunks_exact(d)) {
            full[j * d..(j + 1) * d].copy_from_slice(chunk);
        }

        observer(&IterationState {
            k,
            lambda: lambda.clone(),
            residual: residual.clone(),
            estimate: coef,
            energy,
        });

        let decision = should_stop(
            rule,
            &model,
            &StopInput {
                iteration: k,
                active_blocks: k,
                energy,
                previous: previous.as_deref(),
                current: &full,
            },
        )
        .map_err(|e| e.at_iteration(k))?;
        energy_trace.push(energy);
        thresholds.push(decision.threshold_used);
        estimate_full = full;
        if decision.stop {
            stop_reason = StopReason::Rule(decision.rule);
            break;
        }
        previous = Some(estimate_full.clone());
    }

    Ok(RecoveryResult {
        estimate_full,
        iterations: lambda.len(),
        lambda,
        energy_trace,
        thresholds,
        stop_reason,
    })
}

/// Select, extend Λ, refit. Returns the coefficients and the new residual.
fn advance(
    b: &ComplexMatrix,
    y: &[Complex64],
    lambda: &mut Vec<usize>,
    qr: &mut IncrementalQr,
    residual: &[Complex64],
    d: usize,
) -> Result<(ComplexVector, ComplexVector)> {
    let j = select_block(b, residual, lambda, d)?;
    qr.push_block(&block_columns(b, j, d)?)?;
    lambda.push(j);
    let coef = qr.solve(y)?;
    let residual = fitted_residual(b, y, lambda, d, &coef);
    Ok((coef, residual))
}

/// `y − B_Λ x` evaluated row by row.
fn fitted_residual(
    b: &ComplexMatrix,
    y: &[Complex64],
    lambda: &[usize],
    d: usize,
    coef: &[Complex64],
) -> ComplexVector {
    (0..b.rows())
        .map(|i| {
            let row = b.row(i);
            let fit = lambda.iter().zip(coef.chunks_exact(d)).fold(
                Complex64::new(0.0, 0.0),
                |acc, (&j, x)| {
                    acc + row[j * d..(j + 1) * d]
                        .iter()
                        .zip(x)
                        .fold(Complex64::new(0.0, 0.0), |a, (bij, xj)| a + bij * xj)
                },
            );
            y[i] - fit
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::stopping::ThresholdParams;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn selects_most_correlated_block() {
        let b = ComplexMatrix::identity(4);
        let r = [c(0.0), c(0.0), c(2.0), c(1.0)];
        assert_eq!(select_block(&b, &r, &[], 2).unwrap(), 1);
        assert_eq!(select_block(&b, &r, &[1], 2).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lowest_free_index() {
        let b = ComplexMatrix::identity(6);
        let r = [c(0.0); 6];
        assert_eq!(select_block(&b, &r, &[], 2).unwrap(), 0);
        assert_eq!(select_block(&b, &r, &[0], 2).unwrap(), 1);
    }

    #[test]
    fn exhaustion_and_bad_indices() {
        let b = ComplexMatrix::identity(4);
        let r = [c(1.0); 4];
        assert!(matches!(
            select_block(&b, &r, &[0, 1], 2),
            Err(Error::Exhausted)
        ));
        assert!(matches!(
            select_block(&b, &r, &[2], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(select_block(&b, &r, &[], 3).is_err());
    }

    #[test]
    fn default_guard_respects_rows() {
        assert_eq!(default_guard(400, 10), 30);
        assert_eq!(default_guard(960, 48), 19);
        assert_eq!(default_guard(64, 4), 15);
    }

    /// 8 measurements, 6 blocks of 2: the first 4 blocks are orthonormal
    /// (identity columns) and the rest are unit-norm mixtures.
    fn orthonormal_instance() -> ProblemInstance {
        let params = ModelParams {
            n_blocks: 6,
            block_len: 2,
            measurements: 8,
            sparsity: 2,
            sigma2: 0.0,
        };
        let h = 0.5_f64.sqrt();
        let b = ComplexMatrix::from_fn(8, 12, |i, j| match j {
            0..=7 => c(if i == j { 1.0 } else { 0.0 }),
            _ => c(if i == j - 8 || i == j - 4 { h } else { 0.0 }),
        });
        let mut s = ComplexVector::zeros(12);
        s[2] = c(1.0);
        s[3] = Complex64::new(0.0, -2.0);
        s[6] = c(-0.5);
        s[7] = c(3.0);
        ProblemInstance::from_parts(params, b, s, ComplexVector::zeros(8), vec![1, 3]).unwrap()
    }

    #[test]
    fn noiseless_orthonormal_support_recovered_exactly() {
        let inst = orthonormal_instance();
        let rule = StoppingRule::DerivedThreshold(ThresholdParams::default());
        let res = run_bomp(&inst, &rule, 3).unwrap();
        assert_eq!(res.iterations, 2);
        let mut found = res.lambda.clone();
        found.sort();
        assert_eq!(found, vec![1, 3]);
        assert_eq!(res.stop_reason, StopReason::Rule(RuleTag::DerivedThreshold));
        assert!(res.energy_trace[1] < 1e-24);
        assert!(res.estimate_full.sub(&inst.s).norm() < 1e-12);
    }

    #[test]
    fn guard_must_leave_rows() {
        let inst = orthonormal_instance();
        let rule = StoppingRule::MaxIterations(2);
        assert!(run_bomp(&inst, &rule, 4).is_err());
        assert!(run_bomp(&inst, &rule, 0).is_err());
        assert!(run_bomp(&inst, &StoppingRule::MaxIterations(0), 2).is_err());
    }

    #[test]
    fn max_iterations_beyond_guard_stops_on_guard() {
        let inst = orthonormal_instance();
        let res = run_bomp(&inst, &StoppingRule::MaxIterations(10), 3).unwrap();
        assert_eq!(res.iterations, 3);
        assert_eq!(res.stop_reason, StopReason::Guard);
    }
}
