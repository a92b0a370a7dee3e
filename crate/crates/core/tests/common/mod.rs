//! Shared instance builders and independent oracles for integration tests.
#![allow(dead_code)]

use conic::{psd_factor, solve, SolveStatus};
use mmwave_multicast::channel::{sample_channel, AngleProfile, ArrayGeometry, ChannelSet};
use mmwave_multicast::precoding::{
    CombinerSet, DigitalPrecoderSet, GroupAssignment, PhaseAlphabet, QosTargets,
};
use mmwave_multicast::random::complex_normal_vec;
use mmwave_multicast::sdr::{build_p1, randomize_combiner, recover_analog};
use mmwave_multicast::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random Hermitian PSD matrix of the given rank.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let a = CMat::from_fn(n, rank, |_, _| {
        let v = complex_normal_vec(rng, 1);
        v[0]
    });
    &a * a.adjoint()
}

/// A random vector of unit 2-norm.
pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let v = complex_normal_vec(rng, n);
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// A complete random problem instance.
pub struct Instance {
    pub channels: ChannelSet,
    pub groups: GroupAssignment,
    pub targets: QosTargets,
    pub precoders: DigitalPrecoderSet,
    pub combiners: CombinerSet,
    pub alphabet: PhaseAlphabet,
    pub n_rf: usize,
}

#[derive(Debug, Clone)]
pub struct Dims {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_rf: usize,
    pub users: usize,
    pub groups: usize,
    pub levels: usize,
}

pub fn instance(seed: u64, d: &Dims) -> Instance {
    let mut rng = rng(seed);
    let groups = GroupAssignment::even(d.users, d.groups).unwrap();
    let profile = AngleProfile {
        group_mean_aod: (0..d.groups)
            .map(|_| rng.random_range(-80.0..80.0))
            .collect(),
        user_mean_aoa: (0..d.users)
            .map(|_| rng.random_range(-180.0..180.0))
            .collect(),
        spread_aod: 30.0,
        spread_aoa: 60.0,
        num_paths: 3,
    };
    let channels = sample_channel(
        &ArrayGeometry::new(d.n_tx).unwrap(),
        &ArrayGeometry::new(d.n_rx).unwrap(),
        &profile,
        &groups,
        &mut rng,
    )
    .unwrap();
    let targets =
        QosTargets::from_db(&vec![rng.random_range(0.0..6.0); d.groups], 0.0, 0.0).unwrap();
    let precoders = DigitalPrecoderSet::new(
        (0..d.groups)
            .map(|_| complex_normal_vec(&mut rng, d.n_rf))
            .collect(),
    )
    .unwrap();
    let p_rx = targets.p_rx;
    let combiners = CombinerSet::new(
        (0..d.users)
            .map(|_| random_unit(&mut rng, d.n_rx) * C64::new(p_rx.sqrt(), 0.0))
            .collect(),
        p_rx,
    )
    .unwrap();
    let alphabet = PhaseAlphabet::new(d.levels, 1.0 / d.n_tx as f64).unwrap();
    Instance {
        channels,
        groups,
        targets,
        precoders,
        combiners,
        alphabet,
        n_rf: d.n_rf,
    }
}

/// Exhaustive per-entry phase choice: the alphabet index maximizing
/// `Re(a_l z)`, first index on ties; index 0 when `z = 0`.
pub fn brute_force_choice(alphabet: &PhaseAlphabet, z: C64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for l in 0..alphabet.num_levels {
        let a = C64::from_polar(1.0, alphabet.phase(l));
        let val = (a * z).re;
        if val > best_val {
            best_val = val;
            best = l;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Structural invariants, each checked on one randomized case.
// ---------------------------------------------------------------------------

/// Every recovered analog entry is an alphabet element of modulus √δ, and
/// re-quantizing it returns the same index.
pub fn check_alphabet_closure(
    seed: u64,
    n_tx: usize,
    n_rf: usize,
    levels: usize,
) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = n_tx * n_rf;
    let alphabet = PhaseAlphabet::new(levels, 1.0 / n_tx as f64).map_err(|e| e.to_string())?;
    let d = {
        let rank = rng.random_range(1..=n);
        random_psd(&mut rng, n, rank)
    };
    let u = random_unit(&mut rng, n);
    let f = recover_analog(&d, &alphabet, &u, n_tx, n_rf).map_err(|e| e.to_string())?;
    let m = f.matrix();
    for (p, &idx) in f.indices().iter().enumerate() {
        let entry = m[(p % n_tx, p / n_tx)];
        if entry != alphabet.element(idx) {
            return Err(format!("entry {p} is not alphabet element {idx}"));
        }
        if (entry.norm() - alphabet.modulus).abs() > 1e-15 {
            return Err(format!("entry {p} has modulus {}", entry.norm()));
        }
        if alphabet.quantize(entry) != idx {
            return Err(format!("entry {p} does not re-quantize to {idx}"));
        }
    }
    Ok(())
}

/// Randomized combiners meet the receive budget.
pub fn check_combiner_norm(seed: u64, n_rx: usize, p_rx: f64) -> Result<(), String> {
    let mut rng = rng(seed);
    let w_hat = {
        let rank = rng.random_range(1..=n_rx);
        random_psd(&mut rng, n_rx, rank)
    };
    let w = randomize_combiner(&w_hat, p_rx, &mut rng).map_err(|e| e.to_string())?;
    let err = (w.norm_squared() - p_rx).abs();
    if err > 1e-12 * p_rx {
        return Err(format!("‖w‖² = {} for budget {p_rx}", w.norm_squared()));
    }
    Ok(())
}

/// The solved analog lift has `diag(D) = δ` within the solver tolerance.
pub fn check_lift_diagonal(seed: u64, dims: &Dims) -> Result<(), String> {
    let tol = 1e-7;
    let inst = instance(seed, dims);
    let delta = inst.alphabet.delta();
    let beta = 10.0;
    let relax = build_p1(
        &inst.channels,
        &inst.precoders,
        &inst.combiners,
        &inst.targets,
        &inst.groups,
        beta,
        delta,
    )
    .map_err(|e| e.to_string())?;
    let sol = solve(&relax.problem, tol, 100).map_err(|e| e.to_string())?;
    if sol.status != SolveStatus::Optimal {
        return Err(format!("status {:?}", sol.status));
    }
    let d = sol.block(relax.lift);
    for n in 0..d.nrows() {
        let err = (d[(n, n)] - C64::new(delta, 0.0)).norm();
        if err > tol * (1.0 + delta) {
            return Err(format!("D[{n},{n}] = {} for δ = {delta}", d[(n, n)]));
        }
    }
    Ok(())
}

/// `QᵀQ* = X` to 1e-8 relative.
pub fn check_factor(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    let x = {
        let rank = rng.random_range(1..=n);
        random_psd(&mut rng, n, rank)
    };
    let q = psd_factor(&x).map_err(|e| e.to_string())?;
    let back = q.transpose() * q.map(|v| v.conj());
    let err = (&back - &x).norm();
    if err > 1e-8 * x.norm() {
        return Err(format!(
            "reconstruction error {err:.3e} for ‖X‖ = {:.3e}",
            x.norm()
        ));
    }
    Ok(())
}
