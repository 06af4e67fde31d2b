//! Monte Carlo sweeps of BOMP / ICBOMP stopping rules.
//!
//! ```text
//! bomp-sim bomp --snr-db 0,5,10,15,20 --trials 200 --rules derived,relative,residual \
//!     --pm 0.001 --pf 0.005 --seed 1 --out bomp.csv
//! ```
//!
//! Exit status: 0 on success, 2 for a bad command line or config file, 3 when
//! the simulation itself fails.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blocksparse::harness::{
    parse_list, run_sweep, to_csv, BompDims, ExperimentConfig, Preset, RuleSpec, Scenario, Setup,
};
use blocksparse::stopping::ThresholdParams;
use clap::Parser;

#[derive(Debug, Default, Parser)]
#[command(
    name = "bomp-sim",
    version,
    about = "Monte Carlo comparison of stopping rules for BOMP and ICBOMP",
    args_override_self = true
)]
struct Cli {
    /// bomp or icbomp (may also come from the preset or config file)
    scenario: Option<String>,
    /// Comma-separated SNR grid in dB
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Trials per (rule, SNR) cell
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated rules: derived, relative[:eps1], residual[:eps2], max[:K]
    #[arg(long)]
    rules: Option<String>,
    /// Allowed missed-detection probability
    #[arg(long)]
    pm: Option<f64>,
    /// Allowed false-detection probability
    #[arg(long)]
    pf: Option<f64>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// desk-bomp, paper-bomp, desk-icbomp or paper-icbomp
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines using the long option names
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of blocks N (bomp)
    #[arg(long)]
    blocks: Option<usize>,
    /// Block length d
    #[arg(long = "block-len")]
    block_len: Option<usize>,
    /// Measurements M (bomp)
    #[arg(long)]
    measurements: Option<usize>,
    /// Nonzero blocks N_a (bomp)
    #[arg(long)]
    sparsity: Option<usize>,
    /// Users N (icbomp)
    #[arg(long)]
    users: Option<usize>,
    /// Active users N_a (icbomp)
    #[arg(long)]
    active: Option<usize>,
    /// Receive antennas M_ant (icbomp)
    #[arg(long)]
    antennas: Option<usize>,
    /// Symbol times T (icbomp)
    #[arg(long)]
    slots: Option<usize>,
    /// Iteration cap (default min(30, (M-1)/d))
    #[arg(long)]
    guard: Option<usize>,
    /// Leave the wall_ms column empty
    #[arg(long = "no-wall-time")]
    no_wall_time: bool,
}

impl Cli {
    /// Fills every unset field from `file`.
    fn or(self, file: Cli) -> Cli {
        Cli {
            scenario: self.scenario.or(file.scenario),
            snr_db: self.snr_db.or(file.snr_db),
            trials: self.trials.or(file.trials),
            rules: self.rules.or(file.rules),
            pm: self.pm.or(file.pm),
            pf: self.pf.or(file.pf),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            preset: self.preset.or(file.preset),
            config: self.config,
            blocks: self.blocks.or(file.blocks),
            block_len: self.block_len.or(file.block_len),
            measurements: self.measurements.or(file.measurements),
            sparsity: self.sparsity.or(file.sparsity),
            users: self.users.or(file.users),
            active: self.active.or(file.active),
            antennas: self.antennas.or(file.antennas),
            slots: self.slots.or(file.slots),
            guard: self.guard.or(file.guard),
            no_wall_time: self.no_wall_time || file.no_wall_time,
        }
    }
}

/// Turns `key = value` lines into command-line arguments.
fn config_args(text: &str) -> Result<Vec<String>, String> {
    let mut args = vec!["bomp-sim".to_string()];
    let mut positional = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", no + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "scenario" => positional = Some(value.to_string()),
            "config" => {
                return Err(format!(
                    "config line {}: nested config files are not supported",
                    no + 1
                ))
            }
            "no-wall-time" => match value {
                "true" => args.push("--no-wall-time".into()),
                "false" => {}
                _ => {
                    return Err(format!(
                        "config line {}: no-wall-time takes true or false",
                        no + 1
                    ))
                }
            },
            _ => args.push(format!("--{key}={value}")),
        }
    }
    if let Some(s) = positional {
        args.insert(1, s);
    }
    Ok(args)
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, String> {
    let named_scenario = cli
        .scenario
        .as_deref()
        .map(str::parse::<Scenario>)
        .transpose()
        .map_err(|e| e.to_string())?;
    let preset = cli
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()
        .map_err(|e| e.to_string())?;
    let scenario = match (named_scenario, preset) {
        (Some(s), Some(p)) if p.scenario() != s => {
            return Err(format!(
                "preset is for {} but scenario is {s}",
                p.scenario()
            ))
        }
        (Some(s), _) => s,
        (None, Some(p)) => p.scenario(),
        (None, None) => return Err("no scenario given (bomp or icbomp)".into()),
    };
    let preset = preset.unwrap_or(Preset::default_for(scenario));

    let setup = match scenario {
        Scenario::Bomp => {
            let (n, d, m, na) = preset.bomp_dims().expect("bomp preset");
            Setup::Bomp(BompDims {
                n_blocks: cli.blocks.unwrap_or(n),
                block_len: cli.block_len.unwrap_or(d),
                measurements: cli.measurements.unwrap_or(m),
                sparsity: cli
                    .sparsity
                    .or(na)
                    .ok_or("this preset needs --sparsity (number of nonzero blocks)")?,
            })
        }
        Scenario::Icbomp => {
            let mut dims = preset.icbomp_dims().expect("icbomp preset");
            dims.users = cli.users.unwrap_or(dims.users);
            dims.active = cli.active.unwrap_or(dims.active);
            dims.block_len = cli.block_len.unwrap_or(dims.block_len);
            dims.antennas = cli.antennas.unwrap_or(dims.antennas);
            dims.slots = cli.slots.unwrap_or(dims.slots);
            Setup::Icbomp(dims)
        }
    };

    let default_grid = match scenario {
        Scenario::Bomp => "0,5,10,15,20",
        Scenario::Icbomp => "-2,0,2",
    };
    let snr_db: Vec<f64> =
        parse_list(cli.snr_db.as_deref().unwrap_or(default_grid)).map_err(|e| e.to_string())?;
    let rules: Vec<RuleSpec> = parse_list(
        cli.rules
            .as_deref()
            .unwrap_or("derived,relative,residual,max"),
    )
    .map_err(|e| e.to_string())?;
    let tp = ThresholdParams::default();
    let config = ExperimentConfig {
        setup,
        rules,
        snr_db,
        trials: cli.trials.unwrap_or(100),
        seed: cli.seed.unwrap_or(0),
        p_m: cli.pm.unwrap_or(tp.p_m),
        p_f: cli.pf.unwrap_or(tp.p_f),
        guard: cli.guard,
        omit_wall_time: cli.no_wall_time,
        out: cli.out,
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn parse_args() -> Result<ExperimentConfig, ExitCode> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Err(ExitCode::from(code));
        }
    };
    let cli = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                eprintln!("error: cannot read config {}: {e}", path.display());
                ExitCode::from(2)
            })?;
            let args = config_args(&text).map_err(|e| {
                eprintln!("error: {}: {e}", path.display());
                ExitCode::from(2)
            })?;
            let file = Cli::try_parse_from(args).map_err(|e| {
                eprintln!("error: {}: {}", path.display(), e.kind());
                let _ = e.print();
                ExitCode::from(2)
            })?;
            cli.or(file)
        }
        None => cli,
    };
    build_config(cli).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let config = match parse_args() {
        Ok(c) => c,
        Err(code) => return code,
    };
    let rows = match run_sweep(&config) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if config.out.is_none() {
        let text = match to_csv(&rows) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        };
        if std::io::stdout().write_all(text.as_bytes()).is_err() {
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_arguments() {
        let args = config_args(
            "# comment\nscenario = icbomp\ntrials = 5\nsnr-db = -2,0\nno-wall-time = true\n",
        )
        .unwrap();
        assert_eq!(
            args,
            [
                "bomp-sim",
                "icbomp",
                "--trials=5",
                "--snr-db=-2,0",
                "--no-wall-time"
            ]
        );
        assert!(config_args("trials 5").is_err());
    }

    #[test]
    fn command_line_wins_over_file() {
        let cli = Cli::try_parse_from(["bomp-sim", "--trials", "3"]).unwrap();
        let file = Cli::try_parse_from(["bomp-sim", "bomp", "--trials=9", "--seed=4"]).unwrap();
        let merged = cli.or(file);
        assert_eq!(merged.trials, Some(3));
        assert_eq!(merged.seed, Some(4));
        assert_eq!(merged.scenario.as_deref(), Some("bomp"));
    }

    #[test]
    fn presets_and_scenarios_must_agree() {
        let cli = Cli::try_parse_from(["bomp-sim", "bomp", "--preset", "desk-icbomp"]).unwrap();
        assert!(build_config(cli).is_err());
        let cli = Cli::try_parse_from(["bomp-sim", "--preset", "paper-bomp"]).unwrap();
        assert!(build_config(cli).is_err());
        let cli = Cli::try_parse_from(["bomp-sim", "--preset", "paper-bomp", "--sparsity", "16"])
            .unwrap();
        let cfg = build_config(cli).unwrap();
        assert_eq!(
            cfg.setup,
            Setup::Bomp(BompDims {
                n_blocks: 640,
                block_len: 50,
                measurements: 2000,
                sparsity: 16
            })
        );
    }
}
