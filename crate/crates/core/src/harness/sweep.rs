//! Monte-Carlo execution: channel realizations, algorithm runs, sweeps and
//! aggregation.

use rand::Rng;
use rayon::prelude::*;

use crate::algorithm::{run_digital, run_hybrid, RunOutcome};
use crate::channel::{
    sample_channel, AngleProfile, ChannelSet, CorrelationAccumulator, CorrelationHistogram,
};
use crate::harness::config::{RunMode, ScenarioConfig};
use crate::precoding::{
    angle_grid, linear_to_dbm, mask_string, rx_beam_pattern, tx_beam_pattern, GroupAssignment,
};
use crate::random::{realization_seed, stream, Purpose};
use crate::{Result, SimError};

/// Draws the mean angles of one realization (explicit means are used as
/// given) and returns the resulting profile.
pub fn angle_profile<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> AngleProfile {
    let a = &cfg.angles;
    let mut draw = |range: [f64; 2]| {
        if range[0] == range[1] {
            range[0]
        } else {
            rng.random_range(range[0]..=range[1])
        }
    };
    let group_mean_aod = match &a.aod_means {
        Some(m) => m.clone(),
        None => (0..cfg.num_groups).map(|_| draw(a.aod_range)).collect(),
    };
    let user_mean_aoa = match &a.aoa_means {
        Some(m) => m.clone(),
        None => (0..cfg.num_users).map(|_| draw(a.aoa_range)).collect(),
    };
    AngleProfile {
        group_mean_aod,
        user_mean_aoa,
        spread_aod: a.aod_spread,
        spread_aoa: a.aoa_spread,
        num_paths: cfg.num_paths,
    }
}

/// The channels of realization `realization` (independent of the sweep
/// point for equal dimensions).
pub fn realization_channels(
    cfg: &ScenarioConfig,
    realization: usize,
) -> Result<(ChannelSet, GroupAssignment)> {
    let seed = realization_seed(cfg.master_seed, realization);
    let mut rng = stream(seed, 0, Purpose::Channel);
    let groups = cfg.groups()?;
    let profile = angle_profile(cfg, &mut rng);
    let channels = sample_channel(
        &cfg.tx_array()?,
        &cfg.rx_array()?,
        &profile,
        &groups,
        &mut rng,
    )?;
    Ok((channels, groups))
}

/// Runs one architecture on one realization.
pub fn run_realization(
    cfg: &ScenarioConfig,
    sweep_point: usize,
    realization: usize,
    mode: RunMode,
) -> Result<RunOutcome> {
    let (channels, groups) = realization_channels(cfg, realization)?;
    let seed = realization_seed(cfg.master_seed, realization);
    let targets = cfg.targets()?;
    let loop_cfg = cfg.loop_config(mode)?;
    match mode {
        RunMode::Hybrid => {
            let mut rng = stream(seed, sweep_point, Purpose::Hybrid);
            run_hybrid(
                &channels,
                &loop_cfg,
                cfg.n_rf,
                cfg.alphabet()?,
                &targets,
                &groups,
                &mut rng,
            )
        }
        RunMode::Digital => {
            let mut rng = stream(seed, sweep_point, Purpose::Digital);
            run_digital(&channels, &loop_cfg, &targets, &groups, &mut rng)
        }
    }
}

/// One line of the run table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub sweep_point: usize,
    pub realization: usize,
    pub seed: u64,
    pub mode: RunMode,
    pub n_packets: usize,
    pub p_tx_mw: f64,
    pub p_tx_dbm: f64,
    pub mask: String,
    pub wall_time_s: f64,
}

/// A realization that could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub sweep_point: usize,
    pub realization: usize,
    pub mode: RunMode,
    pub message: String,
}

/// One line of the aggregate table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_point: usize,
    pub mode: RunMode,
    pub mean_n_packets: f64,
    /// `10 log10` of the mean linear power.
    pub mean_p_tx_dbm: f64,
    pub n_realizations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// The configuration of every sweep point, in point order.
    pub points: Vec<ScenarioConfig>,
    pub rows: Vec<RunRow>,
    pub failures: Vec<RunFailure>,
    pub aggregates: Vec<AggregateRow>,
}

/// Averages rows per `(sweep point, mode)`, power in the linear domain.
/// Groups appear in order of first occurrence.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, RunMode)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.sweep_point, r.mode)) {
            keys.push((r.sweep_point, r.mode));
        }
    }
    keys.into_iter()
        .map(|(point, mode)| {
            let sel: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.sweep_point == point && r.mode == mode)
                .collect();
            let n = sel.len() as f64;
            let mean_power = sel.iter().map(|r| r.p_tx_mw).sum::<f64>() / n;
            AggregateRow {
                sweep_point: point,
                mode,
                mean_n_packets: sel.iter().map(|r| r.n_packets as f64).sum::<f64>() / n,
                mean_p_tx_dbm: linear_to_dbm(mean_power).unwrap_or(f64::NEG_INFINITY),
                n_realizations: sel.len(),
            }
        })
        .collect()
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| SimError::InvalidInput(format!("cannot start worker pool: {e}")))
}

/// Runs every `(sweep point, realization, mode)` of the configuration.
///
/// Work is spread over `workers` threads (all cores when `None`); rows come
/// back in `(point, realization, mode)` order regardless of completion
/// order. Failed runs are collected and the sweep continues.
pub fn run_sweep(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.sweep_points();
    let modes = cfg.mode.modes();
    let mut tasks = Vec::new();
    for (p, _) in points.iter().enumerate() {
        for r in 0..cfg.n_realizations {
            for &m in modes {
                tasks.push((p, r, m));
            }
        }
    }
    let outcomes: Vec<std::result::Result<RunRow, RunFailure>> = pool(workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r, mode)| {
                let seed = realization_seed(cfg.master_seed, r);
                run_realization(&points[p], p, r, mode)
                    .map(|out| RunRow {
                        sweep_point: p,
                        realization: r,
                        seed,
                        mode,
                        n_packets: out.metrics.n_packets,
                        p_tx_mw: out.metrics.p_tx_mw,
                        p_tx_dbm: out.metrics.p_tx_dbm,
                        mask: mask_string(&out.metrics.satisfied_mask),
                        wall_time_s: out.metrics.wall_time_s,
                    })
                    .map_err(|e| RunFailure {
                        sweep_point: p,
                        realization: r,
                        mode,
                        message: e.to_string(),
                    })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    let aggregates = aggregate(&rows);
    Ok(SweepResult {
        points,
        rows,
        failures,
        aggregates,
    })
}

/// Pools the intra-/inter-group correlation histogram over all realizations.
pub fn correlation_study(
    cfg: &ScenarioConfig,
    num_bins: usize,
    workers: Option<usize>,
) -> Result<CorrelationHistogram> {
    cfg.validate()?;
    if cfg.num_users < 2 {
        return Err(SimError::config(
            "num_users",
            "correlation statistics need at least two users",
        ));
    }
    let sets: Vec<Result<(ChannelSet, GroupAssignment)>> = pool(workers)?.install(|| {
        (0..cfg.n_realizations)
            .into_par_iter()
            .map(|r| realization_channels(cfg, r))
            .collect()
    });
    let mut acc = CorrelationAccumulator::new(num_bins)?;
    for set in sets {
        let (channels, groups) = set?;
        acc.add(&channels, &groups)?;
    }
    Ok(acc.finish())
}

/// Transmit beam pattern per group and receive pattern per user.
#[derive(Debug, Clone)]
pub struct BeamPatterns {
    pub mode: RunMode,
    pub tx: Vec<Vec<(f64, f64)>>,
    pub rx: Vec<Vec<(f64, f64)>>,
    pub outcome: RunOutcome,
}

/// Designs the first realization and evaluates its beam patterns on
/// `grid_points` angles over `[-90°, 90°]`. Uses the hybrid design unless
/// the configuration selects digital only.
pub fn beam_study(cfg: &ScenarioConfig, grid_points: usize) -> Result<BeamPatterns> {
    cfg.validate()?;
    if grid_points == 0 {
        return Err(SimError::config("grid_points", "must be positive"));
    }
    let mode = cfg.mode.modes()[0];
    let outcome = run_realization(cfg, 0, 0, mode)?;
    let grid = angle_grid(-90.0, 90.0, grid_points);
    let f = outcome.incumbent.analog_matrix(
        cfg.n_tx,
        if mode == RunMode::Hybrid {
            cfg.n_rf
        } else {
            cfg.n_tx
        },
        Some(&cfg.alphabet()?),
    );
    let tx_geom = cfg.tx_array()?;
    let rx_geom = cfg.rx_array()?;
    let tx = outcome
        .incumbent
        .precoders
        .columns()
        .iter()
        .map(|m| tx_beam_pattern(&f, m, &tx_geom, &grid))
        .collect::<Result<_>>()?;
    let rx = outcome
        .incumbent
        .combiners
        .vectors()
        .iter()
        .map(|w| rx_beam_pattern(w, &rx_geom, &grid))
        .collect::<Result<_>>()?;
    Ok(BeamPatterns {
        mode,
        tx,
        rx,
        outcome,
    })
}
