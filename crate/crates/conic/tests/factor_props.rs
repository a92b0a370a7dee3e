use conic::{dominant_rank_ratio, psd_factor, psd_sqrt_columns, CMat, C64};
use proptest::prelude::*;

fn random_psd(n: usize, rank: usize, seed: &[f64]) -> CMat {
    let mut it = seed.iter().cycle();
    let mut next = || *it.next().unwrap();
    let a = CMat::from_fn(n, rank, |_, _| C64::new(next(), next()));
    &a * a.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn factor_reconstructs(
        n in 1usize..=8,
        rank in 1usize..=8,
        seed in prop::collection::vec(-1.0f64..1.0, 128),
    ) {
        let x = random_psd(n, rank.min(n), &seed);
        let q = psd_factor(&x).unwrap();
        let back = q.transpose() * q.map(|v| v.conj());
        let err = (&back - &x).norm();
        prop_assert!(err <= 1e-8 * (1.0 + x.norm()), "err {err}");
        let b = psd_sqrt_columns(&x).unwrap();
        let err_b = (&b * b.adjoint() - &x).norm();
        prop_assert!(err_b <= 1e-8 * (1.0 + x.norm()));
        prop_assert_eq!(q, psd_factor(&x).unwrap());
    }

    #[test]
    fn rank_ratio_in_unit_interval(
        n in 1usize..=6,
        rank in 1usize..=6,
        seed in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let x = random_psd(n, rank.min(n), &seed);
        let r = dominant_rank_ratio(&x).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        if rank == 1 {
            prop_assert!(r < 1e-8);
        }
    }
}
