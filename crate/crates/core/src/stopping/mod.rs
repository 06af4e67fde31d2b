//! Residual-energy statistics and stopping rules for greedy block recovery.
//!
//! After a least-squares fit over `cols_in_ls` columns, the residual energy
//! `E = ‖r‖²` is modeled as Gaussian with
//!
//! ```text
//! μ  = (M − cols_in_ls) · (σ² + n_a·d/M)
//! σ² = (M − cols_in_ls)² / M · (σ² + n_a·d/M)²
//! ```
//!
//! where `n_a` supporting blocks are still undetected. Two thresholds follow:
//! one that keeps the probability of stopping with a block still missing at
//! `p_m`, and one that keeps the probability of continuing once every block
//! has been found at `p_f`. The rule stops when `E` drops to the smaller of
//! the two. The multiuser (ICBOMP) scenario uses the same formulas with
//! `M → M_ant·T`, unit noise and per-block power `ρ₀·d/T`.

pub mod calibration;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::numerics::{std_normal_inv_cdf, Complex64};

/// Model mean and variance of the residual energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub mu: f64,
    pub sigma2: f64,
    /// Per-entry residual variance, `mu / M`.
    pub per_entry_variance: f64,
}

/// Distribution used to turn the residual moments into thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Approximation {
    /// `E ~ N(μ, μ²/M)`.
    #[default]
    Gaussian,
    /// `E ~ (μ / 2M) · χ²(2M)`, the distribution the Gaussian approximates.
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    /// Allowed probability of stopping while a supporting block is still missing.
    pub p_m: f64,
    /// Allowed probability of continuing after every supporting block is found.
    pub p_f: f64,
    /// Undetected blocks assumed when deriving the missed-detection threshold.
    pub n_a_assumed: usize,
    pub approximation: Approximation,
}

impl ThresholdParams {
    pub fn new(p_m: f64, p_f: f64) -> Result<Self> {
        let tp = ThresholdParams {
            p_m,
            p_f,
            ..Default::default()
        };
        tp.validate()?;
        Ok(tp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_m > 0.0 && self.p_m < 1.0) {
            return Err(Error::Domain(format!(
                "p_m must lie in (0,1), got {}",
                self.p_m
            )));
        }
        if !(self.p_f > 0.0 && self.p_f < 1.0) {
            return Err(Error::Domain(format!(
                "p_f must lie in (0,1), got {}",
                self.p_f
            )));
        }
        if self.n_a_assumed == 0 {
            return Err(Error::Domain("n_a_assumed must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            p_m: 0.001,
            p_f: 0.005,
            n_a_assumed: 1,
            approximation: Approximation::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop once `E_k ≤ η_k = min(η_{k,1}, η_{k,0})`.
    DerivedThreshold(ThresholdParams),
    /// Stop once `‖s̄_k − s̄_{k−1}‖ / ‖s̄_{k−1}‖ < epsilon1`.
    RelativeChange { epsilon1: f64 },
    /// Stop once `E_k < epsilon2`.
    ResidualEnergy { epsilon2: f64 },
    /// Stop once `k ≥ K`.
    MaxIterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTag {
    DerivedThreshold,
    RelativeChange,
    ResidualEnergy,
    MaxIterations,
}

impl RuleTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleTag::DerivedThreshold => "derived",
            RuleTag::RelativeChange => "relative",
            RuleTag::ResidualEnergy => "residual",
            RuleTag::MaxIterations => "max",
        }
    }
}

impl StoppingRule {
    pub fn tag(&self) -> RuleTag {
        match self {
            StoppingRule::DerivedThreshold(_) => RuleTag::DerivedThreshold,
            StoppingRule::RelativeChange { .. } => RuleTag::RelativeChange,
            StoppingRule::ResidualEnergy { .. } => RuleTag::ResidualEnergy,
            StoppingRule::MaxIterations(_) => RuleTag::MaxIterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::DerivedThreshold(tp) => tp.validate(),
            StoppingRule::RelativeChange { epsilon1 } if epsilon1.is_nan() || epsilon1 <= 0.0 => {
                Err(Error::Domain(format!(
                    "epsilon1 must be positive, got {epsilon1}"
                )))
            }
            StoppingRule::ResidualEnergy { epsilon2 } if epsilon2.is_nan() || epsilon2 <= 0.0 => {
                Err(Error::Domain(format!(
                    "epsilon2 must be positive, got {epsilon2}"
                )))
            }
            StoppingRule::MaxIterations(0) => Err(Error::Domain(
                "maximum iteration count must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopDecision {
    pub stop: bool,
    /// Energy level compared against, for the energy-based rules.
    pub threshold_used: Option<f64>,
    pub rule: RuleTag,
    /// Relative change was requested against a zero (or absent) previous estimate.
    pub undefined_change: bool,
}

/// What the energy thresholds need to know about the measurement setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyModel {
    /// `y = B s + z` with `M` measurements and noise variance σ².
    Bomp {
        measurements: usize,
        block_len: usize,
        sigma2: f64,
    },
    /// `y = √ρ₀ B s + z` with `M_ant·T` observations and unit noise.
    Icbomp {
        antennas: usize,
        slots: usize,
        block_len: usize,
        rho0: f64,
    },
}

impl EnergyModel {
    /// Threshold `η` after a fit over `active_blocks` blocks.
    pub fn threshold(&self, active_blocks: usize, tp: &ThresholdParams) -> Result<f64> {
        match *self {
            EnergyModel::Bomp {
                measurements,
                block_len,
                sigma2,
            } => derived_threshold(
                measurements,
                active_blocks * block_len,
                block_len,
                tp,
                sigma2,
            ),
            EnergyModel::Icbomp {
                antennas,
                slots,
                block_len,
                rho0,
            } => icbomp_threshold(antennas, slots, active_blocks, block_len, tp, rho0),
        }
    }
}

/// Common scaling of the two scenarios: `dim` observations, noise level, and
/// the residual power contributed by one undetected block.
#[derive(Debug, Clone, Copy)]
struct Setting {
    dim: usize,
    cols_in_ls: usize,
    noise: f64,
    block_power: f64,
}

impl Setting {
    fn check(self) -> Result<Self> {
        if self.cols_in_ls >= self.dim {
            return Err(Error::Degenerate {
                cols: self.cols_in_ls,
                rows: self.dim,
            });
        }
        Ok(self)
    }

    fn free(&self) -> f64 {
        (self.dim - self.cols_in_ls) as f64
    }

    fn mean(&self, n_a: usize) -> f64 {
        self.free() * (self.noise + n_a as f64 * self.block_power)
    }

    fn stats(&self, n_a: usize) -> ResidualStats {
        let mu = self.mean(n_a);
        let dim = self.dim as f64;
        ResidualStats {
            mu,
            sigma2: mu * mu / dim,
            per_entry_variance: mu / dim,
        }
    }

    fn missed(&self, tp: &ThresholdParams) -> Result<f64> {
        let mu = self.mean(tp.n_a_assumed);
        self.quantile(mu, tp.p_m, tp.approximation)
    }

    fn false_alarm(&self, tp: &ThresholdParams) -> Result<f64> {
        let mu0 = self.mean(0);
        self.quantile(mu0, 1.0 - tp.p_f, tp.approximation)
    }

    /// `p`-quantile of the residual energy with mean `mu`.
    fn quantile(&self, mu: f64, p: f64, approx: Approximation) -> Result<f64> {
        let dim = self.dim as f64;
        match approx {
            Approximation::Gaussian => Ok(mu * (1.0 + std_normal_inv_cdf(p)? / dim.sqrt())),
            Approximation::ChiSquare => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain(format!(
                        "quantile level must lie in (0,1), got {p}"
                    )));
                }
                let chi = ChiSquared::new(2.0 * dim)
                    .map_err(|e| Error::Domain(format!("chi-square: {e}")))?;
                Ok(mu / (2.0 * dim) * chi.inverse_cdf(p))
            }
        }
    }

    fn derived(&self, tp: &ThresholdParams) -> Result<f64> {
        tp.validate()?;
        Ok(self.missed(tp)?.min(self.false_alarm(tp)?).max(0.0))
    }
}

fn bomp_setting(m: usize, cols_in_ls: usize, d: usize, sigma2: f64) -> Result<Setting> {
    Setting {
        dim: m,
        cols_in_ls,
        noise: sigma2,
        block_power: d as f64 / m as f64,
    }
    .check()
}

fn icbomp_setting(m_ant: usize, t: usize, l: usize, d: usize, rho0: f64) -> Result<Setting> {
    Setting {
        dim: m_ant * t,
        cols_in_ls: l * d,
        noise: 1.0,
        block_power: rho0 * d as f64 / t as f64,
    }
    .check()
}

/// `μ = (M − cols_in_ls)(σ² + n_a·d/M)`.
pub fn residual_mean(
    m: usize,
    cols_in_ls: usize,
    d: usize,
    n_a: usize,
    sigma2: f64,
) -> Result<f64> {
    Ok(bomp_setting(m, cols_in_ls, d, sigma2)?.mean(n_a))
}

/// `σ_E² = (M − cols_in_ls)²/M · (σ² + n_a·d/M)²`.
pub fn residual_variance(
    m: usize,
    cols_in_ls: usize,
    d: usize,
    n_a: usize,
    sigma2: f64,
) -> Result<f64> {
    Ok(bomp_setting(m, cols_in_ls, d, sigma2)?.stats(n_a).sigma2)
}

pub fn residual_stats(
    m: usize,
    cols_in_ls: usize,
    d: usize,
    n_a: usize,
    sigma2: f64,
) -> Result<ResidualStats> {
    Ok(bomp_setting(m, cols_in_ls, d, sigma2)?.stats(n_a))
}

/// Missed-detection threshold `η_{k,1}`; unclamped, may be negative.
pub fn threshold_missed(
    m: usize,
    cols_in_ls: usize,
    d: usize,
    tp: &ThresholdParams,
    sigma2: f64,
) -> Result<f64> {
    tp.validate()?;
    bomp_setting(m, cols_in_ls, d, sigma2)?.missed(tp)
}

/// False-detection threshold `η_{k,0} = (M − cols_in_ls)(1 − Φ⁻¹(p_f)/√M)σ²`.
pub fn threshold_false(
    m: usize,
    cols_in_ls: usize,
    tp: &ThresholdParams,
    sigma2: f64,
) -> Result<f64> {
    tp.validate()?;
    // block length does not enter the noise-only threshold
    bomp_setting(m, cols_in_ls, 0, sigma2)?.false_alarm(tp)
}

/// `η_k = max(0, min(η_{k,1}, η_{k,0}))`.
pub fn derived_threshold(
    m: usize,
    cols_in_ls: usize,
    d: usize,
    tp: &ThresholdParams,
    sigma2: f64,
) -> Result<f64> {
    bomp_setting(m, cols_in_ls, d, sigma2)?.derived(tp)
}

/// Residual moments for the multiuser scenario with `l` blocks in the fit.
pub fn icbomp_stats(
    m_ant: usize,
    t: usize,
    l: usize,
    d: usize,
    n_a: usize,
    rho0: f64,
) -> Result<ResidualStats> {
    Ok(icbomp_setting(m_ant, t, l, d, rho0)?.stats(n_a))
}

pub fn icbomp_threshold(
    m_ant: usize,
    t: usize,
    l: usize,
    d: usize,
    tp: &ThresholdParams,
    rho0: f64,
) -> Result<f64> {
    icbomp_setting(m_ant, t, l, d, rho0)?.derived(tp)
}

/// Iteration snapshot handed to [`should_stop`].
#[derive(Debug, Clone, Copy)]
pub struct StopInput<'a> {
    /// Iteration just completed, starting at 1.
    pub iteration: usize,
    /// Blocks in the current least-squares fit (`k` for BOMP, `l` for ICBOMP).
    pub active_blocks: usize,
    pub energy: f64,
    /// Full-length estimate before this iteration; `None` at the first.
    pub previous: Option<&'a [Complex64]>,
    /// Full-length estimate after this iteration.
    pub current: &'a [Complex64],
}

pub fn should_stop(
    rule: &StoppingRule,
    model: &EnergyModel,
    input: &StopInput,
) -> Result<StopDecision> {
    let mut decision = StopDecision {
        stop: false,
        threshold_used: None,
        rule: rule.tag(),
        undefined_change: false,
    };
    match *rule {
        StoppingRule::DerivedThreshold(tp) => {
            let eta = model.threshold(input.active_blocks, &tp)?;
            decision.threshold_used = Some(eta);
            decision.stop = input.energy <= eta;
        }
        StoppingRule::ResidualEnergy { epsilon2 } => {
            decision.threshold_used = Some(epsilon2);
            decision.stop = input.energy < epsilon2;
        }
        StoppingRule::MaxIterations(k_max) => {
            decision.stop = input.iteration >= k_max;
        }
        StoppingRule::RelativeChange { epsilon1 } => match input.previous {
            Some(prev) => {
                if prev.len() != input.current.len() {
                    return Err(Error::Dimension {
                        expected: prev.len(),
                        got: input.current.len(),
                    });
                }
                let base: f64 = prev.iter().map(|v| v.norm_sqr()).sum();
                if base == 0.0 {
                    decision.undefined_change = true;
                } else {
                    let diff: f64 = input
                        .current
                        .iter()
                        .zip(prev)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    decision.stop = (diff / base).sqrt() < epsilon1;
                }
            }
            None => decision.undefined_change = true,
        },
    }
    Ok(decision)
}
