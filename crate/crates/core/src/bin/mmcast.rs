//! Command-line front end: single runs, sweeps, channel-correlation
//! histograms and beam patterns, all written as CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmwave_multicast::harness::csv_out::{
    write_aggregate, write_failures, write_histogram, write_pattern, write_points, write_runs,
};
use mmwave_multicast::harness::{
    beam_study, correlation_study, preset, run_sweep, ModeSelection, PresetName, Scale,
    ScenarioConfig,
};
use mmwave_multicast::SimError;

#[derive(Parser)]
#[command(
    name = "mmcast",
    version,
    about = "Hybrid multi-group multicast precoding simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (sweep axes in the configuration are ignored).
    Run(Common),
    /// Run every point of the configured sweep.
    Sweep(Common),
    /// Histogram of intra- and inter-group channel correlations.
    Corrhist {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Transmit and receive beam patterns of the first realization.
    Beampattern {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 361)]
        grid_points: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: fig1 .. fig5.
    #[arg(long)]
    preset: Option<PresetName>,
    /// Use the reduced desk-scale preset (default).
    #[arg(long, conflicts_with = "full_scale")]
    desk: bool,
    /// Use the full-scale preset (hours of compute).
    #[arg(long)]
    full_scale: bool,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the architectures to simulate.
    #[arg(long)]
    mode: Option<ModeSelection>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long)]
    workers: Option<usize>,
    /// Write measured wall-clock times instead of zeros.
    #[arg(long)]
    record_timing: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig, Failure> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ScenarioConfig::load(path).map_err(|e| match e {
                // An unreadable scenario file is a usage problem.
                SimError::Io { .. } => Failure::Validation(e.to_string()),
                other => other.into(),
            })?,
            (None, Some(name)) => {
                let scale = if self.full_scale {
                    eprintln!(
                        "warning: full-scale preset `{}` selected; this can take hours",
                        name.as_str()
                    );
                    Scale::Full
                } else {
                    Scale::Desk
                };
                preset(name, scale)
            }
            (None, None) => {
                return Err(Failure::Validation(
                    "one of --config or --preset is required".into(),
                ))
            }
        };
        if self.config.is_some() && self.full_scale {
            return Err(Failure::Validation(
                "--full-scale applies to presets only".into(),
            ));
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if self.workers == Some(0) {
            return Err(Failure::Validation("--workers must be positive".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare_out(&self, cfg: &ScenarioConfig) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join("config.json");
        std::fs::write(&path, cfg.to_json() + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}

fn simulate(common: &Common, mut cfg: ScenarioConfig, single: bool) -> Result<(), Failure> {
    if single {
        cfg.sweep.clear();
    }
    common.prepare_out(&cfg)?;
    let result = run_sweep(&cfg, common.workers)?;
    let out = &common.out;
    write_runs(&out.join("runs.csv"), &result.rows, common.record_timing)?;
    write_aggregate(&out.join("aggregate.csv"), &result.aggregates)?;
    write_points(&out.join("points.csv"), &result.points)?;
    if !result.failures.is_empty() {
        write_failures(&out.join("failures.csv"), &result.failures)?;
    }
    for a in &result.aggregates {
        println!(
            "point {} {}: mean packets {:.3}, mean power {:.3} dBm over {} realizations",
            a.sweep_point,
            a.mode.as_str(),
            a.mean_n_packets,
            a.mean_p_tx_dbm,
            a.n_realizations
        );
    }
    if !result.failures.is_empty() {
        return Err(Failure::Runtime(format!(
            "{} run(s) failed; see {}",
            result.failures.len(),
            out.join("failures.csv").display()
        )));
    }
    Ok(())
}

fn write_patterns(
    out: &Path,
    tx: &[Vec<(f64, f64)>],
    rx: &[Vec<(f64, f64)>],
) -> Result<(), Failure> {
    for (i, p) in tx.iter().enumerate() {
        write_pattern(&out.join(format!("tx_pattern_group{i}.csv")), p)?;
    }
    for (k, p) in rx.iter().enumerate() {
        write_pattern(&out.join(format!("rx_pattern_user{k}.csv")), p)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.scenario()?;
            simulate(&common, cfg, true)
        }
        Command::Sweep(common) => {
            let cfg = common.scenario()?;
            simulate(&common, cfg, false)
        }
        Command::Corrhist { common, bins } => {
            let cfg = common.scenario()?;
            if bins == 0 {
                return Err(Failure::Validation("--bins must be positive".into()));
            }
            common.prepare_out(&cfg)?;
            let hist = correlation_study(&cfg, bins, common.workers)?;
            write_histogram(&common.out.join("correlation_histogram.csv"), &hist)?;
            println!(
                "intra-group mean correlation {:.4} ({} pairs), inter-group {:.4} ({} pairs)",
                hist.intra_mean, hist.intra_pairs, hist.inter_mean, hist.inter_pairs
            );
            Ok(())
        }
        Command::Beampattern {
            common,
            grid_points,
        } => {
            let cfg = common.scenario()?;
            if grid_points < 2 {
                return Err(Failure::Validation(
                    "--grid-points must be at least 2".into(),
                ));
            }
            common.prepare_out(&cfg)?;
            let patterns = beam_study(&cfg, grid_points)?;
            write_patterns(&common.out, &patterns.tx, &patterns.rx)?;
            let m = &patterns.outcome.metrics;
            println!(
                "{} design: {} users served at {:.3} dBm",
                patterns.mode.as_str(),
                m.n_packets,
                m.p_tx_dbm
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
