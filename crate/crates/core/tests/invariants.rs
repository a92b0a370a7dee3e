//! Randomized structural invariants of the channel model, precoder
//! metrics, relaxations and the alternating loop.

mod common;

use common::{brute_force_choice, instance, random_psd, random_unit, rng, Dims};
use conic::{solve, SolveOptions, SolveStatus};
use mmwave_multicast::algorithm::{run_digital, run_hybrid, LoopConfig, INITIAL_POWER};
use mmwave_multicast::channel::{
    array_response, channel_correlation, sample_channel, ArrayGeometry, ChannelSet,
};
use mmwave_multicast::precoding::{
    count_satisfied, dbm_to_linear, linear_to_dbm, sinr, total_tx_power, CombinerSet,
    DigitalPrecoderSet, GroupAssignment, PhaseAlphabet, QosTargets,
};
use mmwave_multicast::sdr::{build_p2, build_p3, AnalogRecovery};
use mmwave_multicast::{CMat, CVec, C64};
use proptest::prelude::*;
use rand::Rng;

fn small_dims() -> impl Strategy<Value = Dims> {
    (
        1usize..=4,
        1usize..=3,
        1usize..=3,
        1usize..=2,
        prop::sample::select(vec![2usize, 4, 8]),
    )
        .prop_flat_map(|(n_tx, n_rx, g, per_group, levels)| {
            let n_tx = n_tx.max(g);
            (g..=n_tx).prop_map(move |n_rf| Dims {
                n_tx,
                n_rx,
                n_rf,
                users: g * per_group,
                groups: g,
                levels,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn steering_vectors_have_unit_norm(n in 1usize..=64, angle in -400.0f64..400.0, spacing in 0.1f64..1.0) {
        let geometry = ArrayGeometry::with_spacing(n, spacing).unwrap();
        let a = array_response(&geometry, angle);
        prop_assert_eq!(a.len(), n);
        prop_assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(seed in any::<u64>(), n_tx in 1usize..=8, n_rx in 1usize..=4) {
        let inst = instance(seed, &Dims { n_tx, n_rx, n_rf: 1, users: 2, groups: 1, levels: 4 });
        let (a, b) = (inst.channels.user(0), inst.channels.user(1));
        let ab = channel_correlation(a, b).unwrap();
        let ba = channel_correlation(b, a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((channel_correlation(a, a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_sampling_is_a_pure_function_of_the_stream(seed in any::<u64>()) {
        let dims = Dims { n_tx: 6, n_rx: 2, n_rf: 2, users: 4, groups: 2, levels: 4 };
        let a = instance(seed, &dims);
        let b = instance(seed, &dims);
        for k in 0..4 {
            prop_assert_eq!(a.channels.user(k), b.channels.user(k));
        }
    }

    #[test]
    fn alphabet_closure(seed in any::<u64>(), n_tx in 1usize..=4, n_rf in 1usize..=3, levels in 1usize..=16) {
        common::check_alphabet_closure(seed, n_tx, n_rf, levels).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn combiner_norm_meets_budget(seed in any::<u64>(), n_rx in 1usize..=6, p_rx in 1e-3f64..1e3) {
        common::check_combiner_norm(seed, n_rx, p_rx).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn factor_reconstructs(seed in any::<u64>(), n in 1usize..=12) {
        common::check_factor(seed, n).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn recovery_matches_exhaustive_search(
        seed in any::<u64>(),
        n_tx in 1usize..=6,
        n_rf in 1usize..=2,
        levels in prop::sample::select(vec![4usize, 8, 16]),
    ) {
        let mut r = rng(seed);
        let n = n_tx * n_rf;
        let alphabet = PhaseAlphabet::new(levels, 1.0 / n_tx as f64).unwrap();
        let d = { let rank = r.random_range(1..=n); random_psd(&mut r, n, rank) };
        let u = random_unit(&mut r, n);
        let rec = AnalogRecovery::new(&d, n_tx, n_rf).unwrap();
        let z = rec.projections(&u).unwrap();
        let f = rec.recover(&alphabet, &u).unwrap();
        for (p, &idx) in f.indices().iter().enumerate() {
            prop_assert_eq!(idx, brute_force_choice(&alphabet, z[p]));
        }
    }

    #[test]
    fn dbm_round_trip(dbm in -150.0f64..150.0) {
        let back = linear_to_dbm(dbm_to_linear(dbm)).unwrap();
        prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        let mw = dbm_to_linear(dbm);
        let again = dbm_to_linear(linear_to_dbm(mw).unwrap());
        prop_assert!((again - mw).abs() <= 1e-12 * mw);
    }

    #[test]
    fn single_group_scaling(seed in any::<u64>(), c in 0.01f64..100.0, n_tx in 1usize..=6, n_rx in 1usize..=3) {
        let inst = instance(seed, &Dims { n_tx, n_rx, n_rf: n_tx, users: 3, groups: 1, levels: 4 });
        let f = CMat::identity(n_tx, n_tx);
        let scaled = DigitalPrecoderSet::new(
            inst.precoders.columns().iter().map(|m| m * C64::new(c, 0.0)).collect(),
        ).unwrap();
        let p0 = total_tx_power(&f, &inst.precoders);
        prop_assert!((total_tx_power(&f, &scaled) - c * c * p0).abs() <= 1e-12 * c * c * p0);
        for k in 0..3 {
            let w = inst.combiners.vector(k);
            let s0 = sinr(inst.channels.user(k), &f, &inst.precoders, w, 0, inst.targets.sigma2).unwrap();
            let s1 = sinr(inst.channels.user(k), &f, &scaled, w, 0, inst.targets.sigma2).unwrap();
            prop_assert!((s1 - c * c * s0).abs() <= 1e-12 * c * c * s0.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn raising_one_sinr_never_lowers_the_count(seed in any::<u64>(), user in 0usize..6, gain in 1.0f64..10.0) {
        let inst = instance(seed, &Dims { n_tx: 4, n_rx: 2, n_rf: 3, users: 6, groups: 3, levels: 4 });
        let f = CMat::from_fn(4, 3, |i, j| C64::from_polar(0.5, (i * j) as f64));
        let before = count_satisfied(&inst.channels, &f, &inst.precoders, &inst.combiners, &inst.targets, &inst.groups).unwrap();
        // Scaling one channel scales that user's signal and interference
        // equally, so only its SINR rises.
        let mats: Vec<CMat> = (0..6)
            .map(|k| if k == user { inst.channels.user(k) * C64::new(gain, 0.0) } else { inst.channels.user(k).clone() })
            .collect();
        let channels = ChannelSet::new(mats).unwrap();
        let after = count_satisfied(&channels, &f, &inst.precoders, &inst.combiners, &inst.targets, &inst.groups).unwrap();
        prop_assert!(after.sinr[user] >= before.sinr[user]);
        prop_assert!(after.count >= before.count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analog_lift_diagonal_is_delta(seed in any::<u64>(), dims in small_dims()) {
        common::check_lift_diagonal(seed, &dims).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn loop_traces_are_lexicographically_monotone(seed in any::<u64>(), dims in small_dims(), n_rand in 0usize..12) {
        let inst = instance(seed, &dims);
        let cfg = LoopConfig { n_iter: 2, n_rand, beta: 50.0, solver: SolveOptions::default() };
        let out = run_hybrid(&inst.channels, &cfg, dims.n_rf, inst.alphabet, &inst.targets, &inst.groups, &mut rng(seed ^ 1)).unwrap();
        for pair in out.accepts.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            prop_assert!(b.count > a.count || (b.count == a.count && b.power <= a.power));
        }
        // The stored power is the power of the stored precoders.
        let inc = &out.incumbent;
        if out.accepts.is_empty() {
            prop_assert_eq!(inc.best_power, INITIAL_POWER);
            prop_assert_eq!(inc.best_count, 0);
        } else {
            let f = inc.analog_matrix(dims.n_tx, dims.n_rf, Some(&inst.alphabet));
            let p = total_tx_power(&f, &inc.precoders);
            prop_assert!((p - inc.best_power).abs() <= 1e-9 * p);
            prop_assert_eq!(out.metrics.n_packets, inc.best_count);
        }
        for a in &out.audits {
            if a.status == SolveStatus::Optimal {
                prop_assert_eq!(a.violations, 0, "audit {:?}", a);
            }
        }
    }
}

#[test]
fn channel_energy_matches_array_product() {
    // E‖H‖²_F = N_tx N_rx, checked at 5% over 2000 realizations.
    let (n_tx, n_rx) = (8, 2);
    let mut total = 0.0;
    let samples = 2000;
    for s in 0..samples {
        let inst = instance(
            s,
            &Dims {
                n_tx,
                n_rx,
                n_rf: 1,
                users: 1,
                groups: 1,
                levels: 2,
            },
        );
        total += inst.channels.user(0).norm_squared();
    }
    let mean = total / samples as f64;
    let expected = (n_tx * n_rx) as f64;
    assert!(
        (mean - expected).abs() < 0.05 * expected,
        "mean energy {mean}"
    );
}

#[test]
fn zero_randomizations_leave_the_start_untouched() {
    let dims = Dims {
        n_tx: 4,
        n_rx: 2,
        n_rf: 2,
        users: 4,
        groups: 2,
        levels: 4,
    };
    let inst = instance(3, &dims);
    let cfg = LoopConfig {
        n_iter: 3,
        n_rand: 0,
        beta: 10.0,
        solver: SolveOptions::default(),
    };
    let out = run_digital(
        &inst.channels,
        &cfg,
        &inst.targets,
        &inst.groups,
        &mut rng(0),
    )
    .unwrap();
    assert!(out.accepts.is_empty());
    assert_eq!(out.incumbent.best_power, INITIAL_POWER);
    assert_eq!(out.incumbent.best_count, 0);
    assert_eq!(
        out.incumbent.precoders,
        DigitalPrecoderSet::omnidirectional(4, 2)
    );
}

#[test]
fn single_user_digital_relaxation_is_tight() {
    // With F = I, one user and one receive antenna the relaxation optimum is
    // γσ²/‖h‖², attained by m ∝ h.
    for seed in 0..20 {
        let mut r = rng(seed);
        let n_tx = r.random_range(1..=6);
        let h = CMat::from_fn(1, n_tx, |_, _| {
            C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        });
        let gamma_db = r.random_range(-5.0..10.0);
        let sigma2_dbm = r.random_range(-10.0..10.0);
        let targets = QosTargets::from_db(&[gamma_db], sigma2_dbm, 0.0).unwrap();
        let channels = ChannelSet::new(vec![h.clone()]).unwrap();
        let groups = GroupAssignment::even(1, 1).unwrap();
        let combiners = CombinerSet::omnidirectional(1, 1, targets.p_rx);
        let beta = 1e4;
        let relax = build_p2(
            &channels,
            &CMat::identity(n_tx, n_tx),
            &combiners,
            &targets,
            &groups,
            beta,
        )
        .unwrap();
        let sol = solve(&relax.problem, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let oracle = targets.gamma[0] * targets.sigma2 / h.norm_squared();
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle),
            "seed {seed}: {} vs {oracle}",
            sol.objective
        );
    }
}

#[test]
fn single_group_combiner_aligns_with_principal_direction() {
    // One user, no interference and a signal too weak to meet the target:
    // the deficit P_rx σ²γ − Tr(W s s^H) is minimized uniquely by
    // W = P_rx s s^H / ‖s‖².
    for seed in 0..20 {
        let dims = Dims {
            n_tx: 4,
            n_rx: 3,
            n_rf: 4,
            users: 1,
            groups: 1,
            levels: 4,
        };
        let inst = instance(seed, &dims);
        let f = CMat::identity(4, 4);
        let s0: CVec = inst.channels.user(0) * inst.precoders.column(0);
        let (gamma, sigma2, p_rx) = (
            inst.targets.gamma[0],
            inst.targets.sigma2,
            inst.targets.p_rx,
        );
        let scale = (0.5 * sigma2 * gamma / s0.norm_squared()).sqrt();
        let precoders =
            DigitalPrecoderSet::new(vec![inst.precoders.column(0) * C64::new(scale, 0.0)]).unwrap();
        let relaxations =
            build_p3(&inst.channels, &f, &precoders, &inst.targets, &inst.groups).unwrap();
        assert_eq!(relaxations.len(), 1);
        let rel = &relaxations[0];
        let sol = solve(&rel.problem, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let s: CVec = inst.channels.user(0) * precoders.column(0);
        let w = sol.block(rel.block);
        let aligned = (s.adjoint() * w * &s)[(0, 0)].re / s.norm_squared();
        assert!(
            (aligned - p_rx).abs() <= 1e-6 * p_rx,
            "seed {seed}: {aligned}"
        );
        let oracle = p_rx * (sigma2 * gamma - s.norm_squared());
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle),
            "seed {seed}: {} vs {oracle}",
            sol.objective
        );
    }
}

#[test]
fn sampled_channels_are_reproducible_through_the_public_sampler() {
    let groups = GroupAssignment::even(4, 2).unwrap();
    let profile = mmwave_multicast::channel::AngleProfile {
        group_mean_aod: vec![-30.0, 40.0],
        user_mean_aoa: vec![0.0, 10.0, 20.0, 30.0],
        spread_aod: 30.0,
        spread_aoa: 60.0,
        num_paths: 4,
    };
    let tx = ArrayGeometry::new(8).unwrap();
    let rx = ArrayGeometry::new(2).unwrap();
    let a = sample_channel(&tx, &rx, &profile, &groups, &mut rng(11)).unwrap();
    let b = sample_channel(&tx, &rx, &profile, &groups, &mut rng(11)).unwrap();
    for k in 0..4 {
        assert_eq!(a.user(k), b.user(k));
    }
}
