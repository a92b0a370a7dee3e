//! The alternating optimization loop and the fully-digital baseline.
//!
//! Each outer iteration solves the analog, digital and combiner relaxations
//! in turn. After each solve, randomized rank-one candidates are scored
//! against the incumbent with a lexicographic rule: more satisfied users
//! wins, and at equal counts lower (or equal) transmit power wins.
//! Candidates always replace only the block being optimized; the other
//! blocks are taken from the incumbent.

use std::time::Instant;

use conic::{solve_with, SdpSolution, SolveOptions, SolveStatus};
use rand::Rng;
use serde::Serialize;

use crate::channel::ChannelSet;
use crate::precoding::{
    linear_to_dbm, qos_deficit, sinr_from_gains, AnalogPrecoder, CombinerSet, DigitalPrecoderSet,
    GroupAssignment, PhaseAlphabet, QosTargets, TransmitAnalog,
};
use crate::sdr::{
    build_p1, build_p2, build_p3, randomize_combiner, sample_unit_sphere, AnalogRecovery,
    DigitalSampler,
};
use crate::{CMat, CVec, Result, SimError, C64};

/// Initial incumbent power, larger than any power of interest.
pub const INITIAL_POWER: f64 = 1e5;

/// Relative slack allowed when checking a relaxation optimum against a
/// candidate's penalized objective.
pub const BOUND_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub n_iter: usize,
    /// Candidates per stage (the combiner stage uses `⌊n_rand / K⌋` per user).
    pub n_rand: usize,
    /// Slack penalty weight.
    pub beta: f64,
    pub solver: SolveOptions,
}

/// `β = G³ N_RF N_tx N_rx`.
pub fn default_beta(num_groups: usize, n_rf: usize, n_tx: usize, n_rx: usize) -> f64 {
    (num_groups.pow(3) * n_rf * n_tx * n_rx) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Analog,
    Digital,
    Combiner,
}

/// The best solution found so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    /// `None` until the first analog candidate is accepted.
    pub analog: Option<TransmitAnalog>,
    pub precoders: DigitalPrecoderSet,
    pub combiners: CombinerSet,
    /// `g̃`, the transmit power at the last accept.
    pub best_power: f64,
    /// `𝒦̃`, the satisfied-user count at the last accept.
    pub best_count: usize,
}

impl Incumbent {
    /// The analog matrix, or the all-index-0 precoder while none has been
    /// accepted yet.
    pub fn analog_matrix(
        &self,
        n_tx: usize,
        n_rf: usize,
        alphabet: Option<&PhaseAlphabet>,
    ) -> CMat {
        match (&self.analog, alphabet) {
            (Some(a), _) => a.matrix(),
            (None, Some(alpha)) => AnalogPrecoder::uniform(n_tx, n_rf, *alpha).matrix().clone(),
            (None, None) => CMat::identity(n_tx, n_tx),
        }
    }
}

/// `true` iff `(count, power)` beats or ties the incumbent: more satisfied
/// users, or as many with no more power.
pub fn accept(count: usize, power: f64, best_count: usize, best_power: f64) -> bool {
    count > best_count || (count == best_count && power <= best_power)
}

/// Omnidirectional start: `w_k = sqrt(P_rx) e₁`, `m_i = e₁`, `𝒦̃ = 0`,
/// `g̃ = 10⁵`; the analog precoder is unset (or the identity for a
/// fully-digital transmitter).
pub fn init_state(
    analog: Option<TransmitAnalog>,
    n_rf: usize,
    n_rx: usize,
    num_groups: usize,
    num_users: usize,
    p_rx: f64,
) -> Incumbent {
    Incumbent {
        analog,
        precoders: DigitalPrecoderSet::omnidirectional(n_rf, num_groups),
        combiners: CombinerSet::omnidirectional(num_users, n_rx, p_rx),
        best_power: INITIAL_POWER,
        best_count: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptEvent {
    pub iteration: usize,
    pub stage: Stage,
    pub candidate: usize,
    pub count: usize,
    pub power: f64,
}

/// One relaxation solve and how its optimum compares with the candidates
/// drawn from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundAudit {
    pub iteration: usize,
    pub stage: Stage,
    /// The user, for combiner-stage solves.
    pub user: Option<usize>,
    pub status: SolveStatus,
    pub relaxation: f64,
    /// Smallest penalized objective among the candidates.
    pub best_candidate: f64,
    pub candidates: usize,
    /// Candidates whose penalized objective is below the relaxation optimum
    /// by more than [`BOUND_SLACK`] (relative). Only counted for optimal
    /// solves.
    pub violations: usize,
    /// `λ₂/λ₁` of the (first) solved block.
    pub rank_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_count: usize,
    pub best_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub n_packets: usize,
    pub p_tx_mw: f64,
    /// `-inf` for zero power.
    pub p_tx_dbm: f64,
    pub per_user_sinr_db: Vec<f64>,
    pub satisfied_mask: Vec<bool>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub incumbent: Incumbent,
    pub metrics: RunMetrics,
    pub trace: Vec<IterationRecord>,
    pub accepts: Vec<AcceptEvent>,
    pub audits: Vec<BoundAudit>,
    /// The digital stage ran before any analog precoder was accepted and
    /// used the all-index-0 precoder instead.
    pub used_analog_fallback: bool,
}

struct Problem<'a> {
    channels: &'a ChannelSet,
    targets: &'a QosTargets,
    groups: &'a GroupAssignment,
    cfg: &'a LoopConfig,
    /// `None` in fully-digital mode.
    alphabet: Option<PhaseAlphabet>,
    n_rf: usize,
}

struct Run {
    state: Incumbent,
    accepts: Vec<AcceptEvent>,
    audits: Vec<BoundAudit>,
    used_fallback: bool,
}

impl Run {
    fn offer(
        &mut self,
        iteration: usize,
        stage: Stage,
        candidate: usize,
        count: usize,
        power: f64,
    ) -> bool {
        if accept(count, power, self.state.best_count, self.state.best_power) {
            self.state.best_count = count;
            self.state.best_power = power;
            self.accepts.push(AcceptEvent {
                iteration,
                stage,
                candidate,
                count,
                power,
            });
            true
        } else {
            false
        }
    }
}

fn solve_checked(
    problem: &conic::SdpProblem,
    opts: &SolveOptions,
    what: &str,
) -> Result<SdpSolution> {
    let sol = solve_with(problem, opts)?;
    match sol.status {
        SolveStatus::Infeasible | SolveStatus::Unbounded => Err(SimError::InvalidInput(format!(
            "{what} relaxation reported {:?}; slack variables should rule this out",
            sol.status
        ))),
        _ => Ok(sol),
    }
}

/// The relaxation value used for bound audits: the smaller of the primal
/// and dual objectives. The dual objective certifies a lower bound, so a
/// primal value that is only accurate to the solver tolerance is not
/// mistaken for a bound violation.
fn relaxation_bound(sol: &SdpSolution) -> f64 {
    sol.objective.min(sol.dual_objective)
}

fn is_violation(relaxation: f64, candidate: f64) -> bool {
    relaxation > candidate + BOUND_SLACK * (1.0 + candidate.abs())
}

/// Counts satisfied users from per-user gain rows.
fn score(gains: &[Vec<C64>], p: &Problem, noise: &[f64]) -> Result<(usize, f64)> {
    let mut count = 0;
    let mut penalty = 0.0;
    for (k, row) in gains.iter().enumerate() {
        let i = p.groups.group_of(k);
        let s = sinr_from_gains(row, i, noise[k])?;
        if s >= p.targets.gamma[i] {
            count += 1;
        }
        penalty += qos_deficit(row, i, p.targets.gamma[i], noise[k]).max(0.0);
    }
    Ok((count, penalty))
}

fn analog_stage<R: Rng + ?Sized>(p: &Problem, run: &mut Run, t: usize, rng: &mut R) -> Result<()> {
    let alphabet = p.alphabet.expect("analog stage only runs in hybrid mode");
    let (n_tx, n_rf) = (p.channels.n_tx(), p.n_rf);
    let rel = build_p1(
        p.channels,
        &run.state.precoders,
        &run.state.combiners,
        p.targets,
        p.groups,
        p.cfg.beta,
        alphabet.delta(),
    )?;
    let sol = solve_checked(&rel.problem, &p.cfg.solver, "analog")?;
    let d = sol.block(rel.lift);
    let recovery = AnalogRecovery::new(d, n_tx, n_rf)?;
    let receive: Vec<CVec> = (0..p.groups.num_users())
        .map(|k| p.channels.user(k).adjoint() * run.state.combiners.vector(k))
        .collect();
    let noise: Vec<f64> = run
        .state
        .combiners
        .vectors()
        .iter()
        .map(|w| p.targets.sigma2 * w.norm_squared())
        .collect();
    let mut audit = BoundAudit {
        iteration: t,
        stage: Stage::Analog,
        user: None,
        status: sol.status,
        relaxation: relaxation_bound(&sol),
        best_candidate: f64::INFINITY,
        candidates: p.cfg.n_rand,
        violations: 0,
        rank_ratio: conic::dominant_rank_ratio(d)?,
    };
    for c in 0..p.cfg.n_rand {
        let u = sample_unit_sphere(recovery.dim(), rng)?;
        let cand = recovery.recover(&alphabet, &u)?;
        let beams: Vec<CVec> = run
            .state
            .precoders
            .columns()
            .iter()
            .map(|m| cand.matrix() * m)
            .collect();
        let power: f64 = beams.iter().map(|b| b.norm_squared()).sum();
        let gains: Vec<Vec<C64>> = receive
            .iter()
            .map(|e| beams.iter().map(|b| e.dotc(b)).collect())
            .collect();
        let (count, penalty) = score(&gains, p, &noise)?;
        let penalized = power + p.cfg.beta * penalty;
        audit.best_candidate = audit.best_candidate.min(penalized);
        if sol.status == SolveStatus::Optimal && is_violation(audit.relaxation, penalized) {
            audit.violations += 1;
        }
        if run.offer(t, Stage::Analog, c, count, power) {
            run.state.analog = Some(TransmitAnalog::Phased(cand));
        }
    }
    run.audits.push(audit);
    Ok(())
}

fn digital_stage<R: Rng + ?Sized>(p: &Problem, run: &mut Run, t: usize, rng: &mut R) -> Result<()> {
    if run.state.analog.is_none() {
        run.used_fallback = true;
    }
    let f = run
        .state
        .analog_matrix(p.channels.n_tx(), p.n_rf, p.alphabet.as_ref());
    let rel = build_p2(
        p.channels,
        &f,
        &run.state.combiners,
        p.targets,
        p.groups,
        p.cfg.beta,
    )?;
    let sol = solve_checked(&rel.problem, &p.cfg.solver, "digital")?;
    let lifts: Vec<CMat> = rel.blocks.iter().map(|&b| sol.block(b).clone()).collect();
    let sampler = DigitalSampler::new(&lifts)?;
    let effective: Vec<CVec> = (0..p.groups.num_users())
        .map(|k| f.adjoint() * (p.channels.user(k).adjoint() * run.state.combiners.vector(k)))
        .collect();
    let y = f.adjoint() * &f;
    let noise: Vec<f64> = run
        .state
        .combiners
        .vectors()
        .iter()
        .map(|w| p.targets.sigma2 * w.norm_squared())
        .collect();
    let mut audit = BoundAudit {
        iteration: t,
        stage: Stage::Digital,
        user: None,
        status: sol.status,
        relaxation: relaxation_bound(&sol),
        best_candidate: f64::INFINITY,
        candidates: p.cfg.n_rand,
        violations: 0,
        rank_ratio: conic::dominant_rank_ratio(&lifts[0])?,
    };
    for c in 0..p.cfg.n_rand {
        let cand = sampler.draw(rng);
        let power: f64 = cand.columns().iter().map(|m| m.dotc(&(&y * m)).re).sum();
        let gains: Vec<Vec<C64>> = effective
            .iter()
            .map(|e| cand.columns().iter().map(|m| e.dotc(m)).collect())
            .collect();
        let (count, penalty) = score(&gains, p, &noise)?;
        let penalized = power + p.cfg.beta * penalty;
        audit.best_candidate = audit.best_candidate.min(penalized);
        if sol.status == SolveStatus::Optimal && is_violation(audit.relaxation, penalized) {
            audit.violations += 1;
        }
        if run.offer(t, Stage::Digital, c, count, power) {
            run.state.precoders = cand;
        }
    }
    run.audits.push(audit);
    Ok(())
}

fn combiner_stage<R: Rng + ?Sized>(
    p: &Problem,
    run: &mut Run,
    t: usize,
    rng: &mut R,
) -> Result<()> {
    let k_users = p.groups.num_users();
    let per_user = p.cfg.n_rand / k_users;
    let f = run
        .state
        .analog_matrix(p.channels.n_tx(), p.n_rf, p.alphabet.as_ref());
    let rels = build_p3(p.channels, &f, &run.state.precoders, p.targets, p.groups)?;
    let beams: Vec<CVec> = run
        .state
        .precoders
        .columns()
        .iter()
        .map(|m| &f * m)
        .collect();
    let power: f64 = beams.iter().map(|b| b.norm_squared()).sum();
    // Received beams s_{k,j} = H_k F m_j, and the current satisfaction mask.
    let received: Vec<Vec<CVec>> = (0..k_users)
        .map(|k| beams.iter().map(|b| p.channels.user(k) * b).collect())
        .collect();
    let user_eval = |k: usize, w: &CVec| -> Result<(bool, f64)> {
        let i = p.groups.group_of(k);
        let gains: Vec<C64> = received[k].iter().map(|s| w.dotc(s)).collect();
        let noise = p.targets.sigma2 * w.norm_squared();
        let ok = sinr_from_gains(&gains, i, noise)? >= p.targets.gamma[i];
        Ok((
            ok,
            qos_deficit(&gains, i, p.targets.gamma[i], noise).max(0.0),
        ))
    };
    let mut satisfied = Vec::with_capacity(k_users);
    for k in 0..k_users {
        satisfied.push(user_eval(k, run.state.combiners.vector(k))?.0);
    }
    let mut count = satisfied.iter().filter(|&&b| b).count();
    for rel in &rels {
        let k = rel.user;
        let sol = solve_checked(&rel.problem, &p.cfg.solver, "combiner")?;
        let w_hat = sol.block(rel.block);
        let optimum = relaxation_bound(&sol);
        let mut audit = BoundAudit {
            iteration: t,
            stage: Stage::Combiner,
            user: Some(k),
            status: sol.status,
            relaxation: optimum,
            best_candidate: f64::INFINITY,
            candidates: per_user,
            violations: 0,
            rank_ratio: conic::dominant_rank_ratio(w_hat)?,
        };
        for c in 0..per_user {
            let w = randomize_combiner(w_hat, p.targets.p_rx, rng)?;
            let (ok, penalty) = user_eval(k, &w)?;
            audit.best_candidate = audit.best_candidate.min(penalty);
            if sol.status == SolveStatus::Optimal && is_violation(optimum, penalty) {
                audit.violations += 1;
            }
            let cand_count = count - usize::from(satisfied[k]) + usize::from(ok);
            if run.offer(t, Stage::Combiner, c, cand_count, power) {
                run.state.combiners.set(k, w)?;
                satisfied[k] = ok;
                count = cand_count;
            }
        }
        run.audits.push(audit);
    }
    Ok(())
}

fn finish(
    p: &Problem,
    run: Run,
    trace: Vec<IterationRecord>,
    started: Instant,
) -> Result<RunOutcome> {
    let f = run
        .state
        .analog_matrix(p.channels.n_tx(), p.n_rf, p.alphabet.as_ref());
    let sat = crate::precoding::count_satisfied(
        p.channels,
        &f,
        &run.state.precoders,
        &run.state.combiners,
        p.targets,
        p.groups,
    )?;
    let p_tx_mw = crate::precoding::total_tx_power(&f, &run.state.precoders);
    let metrics = RunMetrics {
        n_packets: sat.count,
        p_tx_mw,
        p_tx_dbm: linear_to_dbm(p_tx_mw).unwrap_or(f64::NEG_INFINITY),
        per_user_sinr_db: sat
            .sinr
            .iter()
            .map(|&s| {
                if s > 0.0 {
                    10.0 * s.log10()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect(),
        satisfied_mask: sat.mask,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        incumbent: run.state,
        metrics,
        trace,
        accepts: run.accepts,
        audits: run.audits,
        used_analog_fallback: run.used_fallback,
    })
}

fn run_loop<R: Rng + ?Sized>(p: &Problem, state: Incumbent, rng: &mut R) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut run = Run {
        state,
        accepts: Vec::new(),
        audits: Vec::new(),
        used_fallback: false,
    };
    let mut trace = Vec::with_capacity(p.cfg.n_iter);
    for t in 1..=p.cfg.n_iter {
        // A stage without candidates cannot change the incumbent, so its
        // relaxation is not solved at all.
        if p.alphabet.is_some() && p.cfg.n_rand > 0 {
            analog_stage(p, &mut run, t, rng)?;
        }
        if p.cfg.n_rand > 0 {
            digital_stage(p, &mut run, t, rng)?;
        }
        if p.cfg.n_rand / p.groups.num_users() > 0 {
            combiner_stage(p, &mut run, t, rng)?;
        }
        trace.push(IterationRecord {
            iteration: t,
            best_count: run.state.best_count,
            best_power: run.state.best_power,
        });
    }
    finish(p, run, trace, started)
}

fn check_inputs(
    channels: &ChannelSet,
    cfg: &LoopConfig,
    targets: &QosTargets,
    groups: &GroupAssignment,
) -> Result<()> {
    if channels.num_users() != groups.num_users() {
        return Err(SimError::dim(
            "channel users",
            groups.num_users(),
            channels.num_users(),
        ));
    }
    if targets.gamma.len() != groups.num_groups() {
        return Err(SimError::dim(
            "SINR targets",
            groups.num_groups(),
            targets.gamma.len(),
        ));
    }
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(SimError::InvalidInput(format!(
            "penalty weight must be positive, got {}",
            cfg.beta
        )));
    }
    Ok(())
}

/// Alternating design of a hybrid transmitter with `n_rf` RF chains and
/// phase shifters from `alphabet`.
pub fn run_hybrid<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &LoopConfig,
    n_rf: usize,
    alphabet: PhaseAlphabet,
    targets: &QosTargets,
    groups: &GroupAssignment,
    rng: &mut R,
) -> Result<RunOutcome> {
    check_inputs(channels, cfg, targets, groups)?;
    let g = groups.num_groups();
    if !(g <= n_rf && n_rf <= channels.n_tx()) {
        return Err(SimError::InvalidInput(format!(
            "need G <= N_RF <= N_tx, got G = {g}, N_RF = {n_rf}, N_tx = {}",
            channels.n_tx()
        )));
    }
    let p = Problem {
        channels,
        targets,
        groups,
        cfg,
        alphabet: Some(alphabet),
        n_rf,
    };
    let state = init_state(
        None,
        n_rf,
        channels.n_rx(),
        g,
        groups.num_users(),
        targets.p_rx,
    );
    run_loop(&p, state, rng)
}

/// Fully-digital baseline: `F = I`, so only the digital precoders and the
/// combiners are optimized.
pub fn run_digital<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &LoopConfig,
    targets: &QosTargets,
    groups: &GroupAssignment,
    rng: &mut R,
) -> Result<RunOutcome> {
    check_inputs(channels, cfg, targets, groups)?;
    let n_tx = channels.n_tx();
    let p = Problem {
        channels,
        targets,
        groups,
        cfg,
        alphabet: None,
        n_rf: n_tx,
    };
    let state = init_state(
        Some(TransmitAnalog::FullyDigital { n_tx }),
        n_tx,
        channels.n_rx(),
        groups.num_groups(),
        groups.num_users(),
        targets.p_rx,
    );
    run_loop(&p, state, rng)
}
