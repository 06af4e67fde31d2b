use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bomp::default_guard;
use crate::coding::PacketCodec;
use crate::comms::CommsParams;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::stopping::{StoppingRule, ThresholdParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Bomp,
    Icbomp,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Bomp => "bomp",
            Scenario::Icbomp => "icbomp",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bomp" => Ok(Scenario::Bomp),
            "icbomp" => Ok(Scenario::Icbomp),
            other => Err(Error::Parse(format!(
                "unknown scenario '{other}' (expected bomp or icbomp)"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dimensions of the generic block-sparse model; the noise level comes from
/// the SNR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BompDims {
    pub n_blocks: usize,
    pub block_len: usize,
    pub measurements: usize,
    pub sparsity: usize,
}

/// Dimensions of the uplink scenario; ρ₀ comes from the SNR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcbompDims {
    pub users: usize,
    pub active: usize,
    pub block_len: usize,
    pub antennas: usize,
    pub slots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    Bomp(BompDims),
    Icbomp(IcbompDims),
}

impl Setup {
    pub fn scenario(&self) -> Scenario {
        match self {
            Setup::Bomp(_) => Scenario::Bomp,
            Setup::Icbomp(_) => Scenario::Icbomp,
        }
    }

    /// Observation length.
    pub fn measurements(&self) -> usize {
        match self {
            Setup::Bomp(b) => b.measurements,
            Setup::Icbomp(c) => c.antennas * c.slots,
        }
    }

    pub fn block_len(&self) -> usize {
        match self {
            Setup::Bomp(b) => b.block_len,
            Setup::Icbomp(c) => c.block_len,
        }
    }

    /// Noise variance per observation entry at `snr_db`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        match self {
            Setup::Bomp(_) => bomp_sigma2(snr_db),
            Setup::Icbomp(_) => 1.0,
        }
    }

    pub fn model_params(&self, snr_db: f64) -> Option<ModelParams> {
        match *self {
            Setup::Bomp(b) => Some(ModelParams {
                n_blocks: b.n_blocks,
                block_len: b.block_len,
                measurements: b.measurements,
                sparsity: b.sparsity,
                sigma2: bomp_sigma2(snr_db),
            }),
            Setup::Icbomp(_) => None,
        }
    }

    pub fn comms_params(&self, snr_db: f64) -> Option<CommsParams> {
        match *self {
            Setup::Icbomp(c) => Some(CommsParams {
                users: c.users,
                active: c.active,
                block_len: c.block_len,
                antennas: c.antennas,
                slots: c.slots,
                rho0: db_to_linear(snr_db),
            }),
            Setup::Bomp(_) => None,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// σ² = 1/SNR.
pub fn bomp_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DeskBomp,
    PaperBomp,
    DeskIcbomp,
    PaperIcbomp,
}

impl Preset {
    pub fn default_for(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Bomp => Preset::DeskBomp,
            Scenario::Icbomp => Preset::DeskIcbomp,
        }
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            Preset::DeskBomp | Preset::PaperBomp => Scenario::Bomp,
            Preset::DeskIcbomp | Preset::PaperIcbomp => Scenario::Icbomp,
        }
    }

    /// `(N, d, M, N_a)`. The large BOMP preset leaves `N_a` to the
    /// caller, so its `sparsity` is `None`.
    pub fn bomp_dims(&self) -> Option<(usize, usize, usize, Option<usize>)> {
        match self {
            Preset::DeskBomp => Some((128, 10, 400, Some(8))),
            Preset::PaperBomp => Some((640, 50, 2000, None)),
            _ => None,
        }
    }

    pub fn icbomp_dims(&self) -> Option<IcbompDims> {
        match self {
            Preset::DeskIcbomp => Some(IcbompDims {
                users: 64,
                active: 4,
                block_len: 48,
                antennas: 4,
                slots: 240,
            }),
            Preset::PaperIcbomp => Some(IcbompDims {
                users: 640,
                active: 16,
                block_len: 200,
                antennas: 8,
                slots: 1000,
            }),
            _ => None,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk-bomp" => Ok(Preset::DeskBomp),
            "paper-bomp" => Ok(Preset::PaperBomp),
            "desk-icbomp" => Ok(Preset::DeskIcbomp),
            "paper-icbomp" => Ok(Preset::PaperIcbomp),
            other => Err(Error::Parse(format!(
                "unknown preset '{other}' (desk-bomp, paper-bomp, desk-icbomp, paper-icbomp)"
            ))),
        }
    }
}

/// A stopping rule as written on the command line. Parameters left out take
/// their usual values: ε₁ = 0.25, ε₂ = noise energy of the cell, K = 30.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
    Derived,
    Relative(f64),
    /// `None` means `M` times the noise variance of the cell.
    Residual(Option<f64>),
    Max(usize),
}

pub const DEFAULT_EPSILON1: f64 = 0.25;
pub const DEFAULT_MAX_ITERATIONS: usize = 30;

impl RuleSpec {
    /// Concrete rule for one SNR cell.
    pub fn resolve(&self, setup: &Setup, snr_db: f64, tp: ThresholdParams) -> StoppingRule {
        match *self {
            RuleSpec::Derived => StoppingRule::DerivedThreshold(tp),
            RuleSpec::Relative(epsilon1) => StoppingRule::RelativeChange { epsilon1 },
            RuleSpec::Residual(eps) => StoppingRule::ResidualEnergy {
                epsilon2: eps
                    .unwrap_or_else(|| setup.measurements() as f64 * setup.noise_variance(snr_db)),
            },
            RuleSpec::Max(k) => StoppingRule::MaxIterations(k),
        }
    }
}

impl FromStr for RuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let float = |a: &str| -> Result<f64> {
            let v: f64 = a
                .parse()
                .map_err(|_| Error::Parse(format!("rule '{s}': '{a}' is not a number")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!(
                    "rule '{s}': parameter must be positive"
                )));
            }
            Ok(v)
        };
        match (name, arg) {
            ("derived", None) => Ok(RuleSpec::Derived),
            ("relative", None) => Ok(RuleSpec::Relative(DEFAULT_EPSILON1)),
            ("relative", Some(a)) => Ok(RuleSpec::Relative(float(a)?)),
            ("residual", None) => Ok(RuleSpec::Residual(None)),
            ("residual", Some(a)) => Ok(RuleSpec::Residual(Some(float(a)?))),
            ("max", None) => Ok(RuleSpec::Max(DEFAULT_MAX_ITERATIONS)),
            ("max", Some(a)) => match a.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(RuleSpec::Max(k)),
                _ => Err(Error::Parse(format!(
                    "rule '{s}': iteration count must be a positive integer"
                ))),
            },
            _ => Err(Error::Parse(format!(
                "unknown rule '{s}' (derived, relative[:eps1], residual[:eps2], max[:K])"
            ))),
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::Derived => f.write_str("derived"),
            RuleSpec::Relative(e) => write!(f, "relative:{e}"),
            RuleSpec::Residual(None) => f.write_str("residual"),
            RuleSpec::Residual(Some(e)) => write!(f, "residual:{e}"),
            RuleSpec::Max(k) => write!(f, "max:{k}"),
        }
    }
}

/// Comma-separated list of items.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("'{}': {e}", t.trim())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub rules: Vec<RuleSpec>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub p_m: f64,
    pub p_f: f64,
    /// Iteration cap; `None` uses [`default_guard`].
    pub guard: Option<usize>,
    /// Leave the wall_ms column empty so that reruns are byte-identical.
    pub omit_wall_time: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config with the default probabilities `p_m = 0.001`, `p_f = 0.005`
    /// and no explicit guard or output path.
    pub fn new(
        setup: Setup,
        rules: Vec<RuleSpec>,
        snr_db: Vec<f64>,
        trials: usize,
        seed: u64,
    ) -> Self {
        let tp = ThresholdParams::default();
        ExperimentConfig {
            setup,
            rules,
            snr_db,
            trials,
            seed,
            p_m: tp.p_m,
            p_f: tp.p_f,
            guard: None,
            omit_wall_time: false,
            out: None,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.setup.scenario()
    }

    pub fn threshold_params(&self) -> Result<ThresholdParams> {
        ThresholdParams::new(self.p_m, self.p_f)
    }

    pub fn effective_guard(&self) -> usize {
        self.guard
            .unwrap_or_else(|| default_guard(self.setup.measurements(), self.setup.block_len()))
    }

    /// Checks everything that can be checked before running a trial.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Params("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Params("the SNR grid is empty".into()));
        }
        if let Some(bad) = self
            .snr_db
            .iter()
            .find(|v| v.is_nan() || **v == f64::NEG_INFINITY)
        {
            return Err(Error::Params(format!("SNR {bad} dB is not usable")));
        }
        if self.rules.is_empty() {
            return Err(Error::Params("no stopping rules given".into()));
        }
        let tp = self.threshold_params()?;
        for &snr in &self.snr_db {
            match self.setup {
                Setup::Bomp(_) => self
                    .setup
                    .model_params(snr)
                    .expect("bomp setup")
                    .validate()?,
                Setup::Icbomp(_) => self
                    .setup
                    .comms_params(snr)
                    .expect("icbomp setup")
                    .validate()?,
            }
            for rule in &self.rules {
                rule.resolve(&self.setup, snr, tp).validate()?;
            }
        }
        if let Setup::Icbomp(c) = self.setup {
            PacketCodec::for_block_len(c.block_len)?;
        }
        let guard = self.effective_guard();
        let (m, d) = (self.setup.measurements(), self.setup.block_len());
        if guard == 0 || guard * d >= m {
            return Err(Error::Params(format!(
                "iteration guard {guard} must satisfy 1 <= guard and guard*d < {m}"
            )));
        }
        Ok(())
    }
}
