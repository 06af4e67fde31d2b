use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Scenario, Setup};
use super::metrics::{detection_probability, nmse, symbol_error_rate, CompensatedSum};
use crate::bomp::run_bomp;
use crate::coding::PacketCodec;
use crate::comms::{generate_comms_instance, run_icbomp};
use crate::error::{Error, Result};
use crate::model::generate_instance;
use crate::numerics::Rng;
use crate::stopping::{StoppingRule, ThresholdParams};

pub const CSV_HEADER: [&str; 10] = [
    "scenario",
    "rule",
    "snr_db",
    "mean_iterations",
    "nmse",
    "detection_prob",
    "ser",
    "trials",
    "wall_ms",
    "detection_all_prob",
];

/// Aggregates of one (rule, SNR) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: Scenario,
    pub rule: String,
    pub snr_db: f64,
    pub mean_iterations: f64,
    pub nmse: f64,
    /// Mean fraction of supporting blocks (active users) detected.
    pub detection_prob: f64,
    /// Only for the uplink scenario.
    pub ser: Option<f64>,
    pub trials: usize,
    /// Time spent inside the recovery routine, summed over trials.
    pub wall_ms: Option<f64>,
    /// Fraction of trials in which every supporting block was detected.
    pub detection_all_prob: f64,
}

/// Per-trial measurements for one rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub iterations: usize,
    pub nmse: f64,
    pub detection: f64,
    pub all_detected: bool,
    pub ser: Option<f64>,
    pub elapsed: Duration,
}

/// Stream for trial `trial` of SNR point `snr_index`. Every rule sees the
/// same instance.
pub fn trial_rng(seed: u64, snr_index: usize, trial: usize) -> Rng {
    Rng::derive(seed, &[snr_index as u64, trial as u64])
}

/// Draws one instance and runs every rule on it.
pub fn run_trial(
    setup: &Setup,
    rules: &[StoppingRule],
    snr_db: f64,
    guard: usize,
    rng: &mut Rng,
) -> Result<Vec<TrialOutcome>> {
    match *setup {
        Setup::Bomp(_) => {
            let params = setup.model_params(snr_db).expect("bomp setup");
            let inst = generate_instance(params, rng)?;
            rules
                .iter()
                .map(|rule| {
                    let start = Instant::now();
                    let out = run_bomp(&inst, rule, guard)?;
                    let elapsed = start.elapsed();
                    let detection = detection_probability(&inst.support, &out.lambda)?;
                    Ok(TrialOutcome {
                        iterations: out.iterations,
                        nmse: nmse(&inst.s, &out.estimate_full)?,
                        detection,
                        all_detected: detection == 1.0,
                        ser: None,
                        elapsed,
                    })
                })
                .collect()
        }
        Setup::Icbomp(_) => {
            let params = setup.comms_params(snr_db).expect("icbomp setup");
            let codec = PacketCodec::for_block_len(params.block_len)?;
            let inst = generate_comms_instance(params, &codec, rng)?;
            let d = params.block_len;
            let truth: Vec<_> = inst
                .active
                .iter()
                .flat_map(|&n| inst.user_symbols(n).to_vec())
                .collect();
            rules
                .iter()
                .map(|rule| {
                    let start = Instant::now();
                    let out = run_icbomp(&inst, &codec, rule, guard)?;
                    let elapsed = start.elapsed();
                    let decided: Vec<_> = inst
                        .active
                        .iter()
                        .flat_map(|&n| out.symbol_decisions[n * d..(n + 1) * d].to_vec())
                        .collect();
                    let detection = detection_probability(&inst.active, &out.detected())?;
                    Ok(TrialOutcome {
                        iterations: out.iterations,
                        nmse: nmse(&inst.s, &out.estimate_full)?,
                        detection,
                        all_detected: detection == 1.0,
                        ser: Some(symbol_error_rate(&truth, &decided)?),
                        elapsed,
                    })
                })
                .collect()
        }
    }
}

/// Runs every (rule, SNR) cell and returns rows ordered by rule, then SNR.
/// Writes the CSV when `config.out` is set.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let tp = config.threshold_params()?;
    let guard = config.effective_guard();
    let mut grid: Vec<Vec<MetricsRow>> = vec![Vec::new(); config.rules.len()];
    for (snr_index, &snr_db) in config.snr_db.iter().enumerate() {
        for (r, row) in run_point(config, tp, guard, snr_index, snr_db)?
            .into_iter()
            .enumerate()
        {
            grid[r].push(row);
        }
    }
    let rows: Vec<MetricsRow> = grid.into_iter().flatten().collect();
    if let Some(path) = &config.out {
        write_csv(path, &rows)?;
    }
    Ok(rows)
}

fn run_point(
    config: &ExperimentConfig,
    tp: ThresholdParams,
    guard: usize,
    snr_index: usize,
    snr_db: f64,
) -> Result<Vec<MetricsRow>> {
    let rules: Vec<StoppingRule> = config
        .rules
        .iter()
        .map(|r| r.resolve(&config.setup, snr_db, tp))
        .collect();
    let outcomes: Vec<Vec<TrialOutcome>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(config.seed, snr_index, trial);
            run_trial(&config.setup, &rules, snr_db, guard, &mut rng).map_err(|e| Error::Trial {
                rule: config
                    .rules
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                snr_db,
                trial,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    Ok(config
        .rules
        .iter()
        .enumerate()
        .map(|(r, spec)| {
            let cell: Vec<&TrialOutcome> = outcomes.iter().map(|o| &o[r]).collect();
            aggregate(config, spec.to_string(), snr_db, &cell)
        })
        .collect())
}

fn aggregate(
    config: &ExperimentConfig,
    rule: String,
    snr_db: f64,
    cell: &[&TrialOutcome],
) -> MetricsRow {
    let n = cell.len() as f64;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| -> f64 {
        cell.iter()
            .map(|o| f(o))
            .collect::<CompensatedSum>()
            .value()
            / n
    };
    let ser = match config.scenario() {
        Scenario::Icbomp => Some(mean(&|o| o.ser.unwrap_or(1.0))),
        Scenario::Bomp => None,
    };
    let wall_ms = (!config.omit_wall_time).then(|| {
        cell.iter()
            .map(|o| o.elapsed.as_secs_f64() * 1e3)
            .collect::<CompensatedSum>()
            .value()
    });
    MetricsRow {
        scenario: config.scenario(),
        rule,
        snr_db,
        mean_iterations: mean(&|o| o.iterations as f64),
        nmse: mean(&|o| o.nmse),
        detection_prob: mean(&|o| o.detection),
        ser,
        trials: cell.len(),
        wall_ms,
        detection_all_prob: mean(&|o| f64::from(u8::from(o.all_detected))),
    }
}

/// CSV text for `rows`, header included.
pub fn to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record([
            row.scenario.as_str().to_string(),
            row.rule.clone(),
            row.snr_db.to_string(),
            row.mean_iterations.to_string(),
            row.nmse.to_string(),
            row.detection_prob.to_string(),
            row.ser.map(|v| v.to_string()).unwrap_or_default(),
            row.trials.to_string(),
            row.wall_ms.map(|v| format!("{v:.3}")).unwrap_or_default(),
            row.detection_all_prob.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

/// Writes the CSV through a temporary file in the target directory and
/// renames it into place.
pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let text = to_csv(rows)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// The CSV with the wall_ms column blanked, for comparing runs.
pub fn strip_wall_time(csv_text: &str) -> Result<String> {
    let col = CSV_HEADER
        .iter()
        .position(|h| *h == "wall_ms")
        .expect("header has wall_ms");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let fields: Vec<&str> = record
            .iter()
            .enumerate()
            .map(|(i, f)| if i == col && f != "wall_ms" { "" } else { f })
            .collect();
        w.write_record(fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}
