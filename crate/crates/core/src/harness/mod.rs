//! Monte Carlo driver: SNR sweeps over stopping rules, per-cell metrics and
//! CSV output.
//!
//! Each SNR point draws `trials` instances from streams keyed by
//! `(seed, SNR index, trial)`. All rules of a point run on the same
//! instances, so differences between rules are not masked by sampling noise.

mod config;
mod metrics;
mod sweep;

pub use config::{
    bomp_sigma2, db_to_linear, parse_list, BompDims, ExperimentConfig, IcbompDims, Preset,
    RuleSpec, Scenario, Setup, DEFAULT_EPSILON1, DEFAULT_MAX_ITERATIONS,
};
pub use metrics::{detection_probability, nmse, symbol_error_rate, CompensatedSum};
pub use sweep::{
    run_sweep, run_trial, strip_wall_time, to_csv, trial_rng, write_csv, MetricsRow, TrialOutcome,
    CSV_HEADER,
};
