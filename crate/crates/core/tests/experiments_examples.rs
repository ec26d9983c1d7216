mod oracle;

use atshuffle::chains::{BlockSchedule, SelectionRule};
use atshuffle::experiments::{
    asep_tail_check, block_decomposition_check, block_inverse_gap, burn_in_profile, disconnect_probability,
    disconnect_product_bound, extreme_left_boundaries, localization_tail_check, lower_bound_experiment, mixing_exact,
    spatial_decay_curve, BiasFamily, BurnInThresholds, ExperimentResult, LowerBoundSettings, MeasureMode, SpatialMode,
    SpatialTargets, StartState,
};
use atshuffle::measure::Caps;
use atshuffle::{BiasMatrix, LocalizationVector, Permutation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn estimates(res: &ExperimentResult, series: &str) -> Vec<(f64, f64)> {
    res.series_named(series)
        .unwrap_or_else(|| panic!("no series {series}"))
        .points
        .iter()
        .map(|p| (p.x, p.estimate))
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn asep_tail_small_and_moderate() {
    let res = asep_tail_check(3, 1, 0.75, &[1, 2, 3], true).unwrap();
    let tail = estimates(&res, "rightmost-tail");
    assert!((tail[0].1 - 4.0 / 13.0).abs() < 1e-12);
    assert!((tail[1].1 - 1.0 / 13.0).abs() < 1e-12);
    assert_eq!(tail[2].1, 0.0);

    let rs: Vec<usize> = (8..=24).collect();
    let res = asep_tail_check(40, 10, 0.75, &rs, false).unwrap();
    assert!(res.passed(), "{:?}", res.failures());
    let bound = estimates(&res, "tail-bound");
    for ((r, t), (_, b)) in estimates(&res, "rightmost-tail").into_iter().zip(bound) {
        assert!(t <= b, "r = {r}: {t} > {b}");
    }
    let beyond = asep_tail_check(40, 10, 0.75, &[31, 35], false).unwrap();
    assert!(estimates(&beyond, "rightmost-tail").iter().all(|&(_, t)| t == 0.0));
}

#[test]
fn exact_tails_respect_the_geometric_bound() {
    let mut r = rng(40);
    for _ in 0..5 {
        let p = BiasMatrix::random_eps(6, 0.5, &mut r).unwrap();
        let res = localization_tail_check(&p, None, MeasureMode::Exact, &Caps::default(), &mut r).unwrap();
        assert!(res.passed(), "{:?}", res.failures());
        let law = oracle::stationary(&p, None);
        for (k, tail) in estimates(&res, "first-position-tail") {
            let k = k as usize;
            let want = law.mass(|s| s[0] > k);
            assert!((tail - want).abs() < 1e-12, "k = {k}");
        }
        for (r, tail) in estimates(&res, "right-displacement-tail") {
            let r = r as usize;
            let want = (1..=6)
                .map(|k| law.mass(|s| s.iter().position(|&x| x == k).unwrap() + 1 >= k + r))
                .fold(0.0, f64::max);
            assert!((tail - want).abs() < 1e-12, "r = {r}");
        }
    }
    let p = BiasMatrix::totally_asymmetric(6);
    let res = localization_tail_check(&p, None, MeasureMode::Exact, &Caps::default(), &mut r).unwrap();
    for name in ["first-position-tail", "right-displacement-tail", "left-displacement-tail"] {
        assert!(estimates(&res, name).iter().all(|&(r, t)| t == 0.0 || r == 0.0), "{name}");
    }
}

#[test]
fn disconnect_examples() {
    let mut r = rng(41);
    for q in [0.6, 0.8] {
        let p = BiasMatrix::constant(2, q).unwrap();
        let res = disconnect_probability(&p, None, None, &[1], MeasureMode::Exact, &Caps::default(), &mut r).unwrap();
        assert!((estimates(&res, "disconnect-probability")[0].1 - q).abs() < 1e-12);
    }

    let p = BiasMatrix::constant(5, 0.6).unwrap();
    let ell = LocalizationVector::constant(5, 0);
    let res = disconnect_probability(&p, Some(&ell), None, &[], MeasureMode::Exact, &Caps::default(), &mut r).unwrap();
    assert!(estimates(&res, "disconnect-probability").iter().all(|&(_, v)| (v - 1.0).abs() < 1e-12));

    for _ in 0..5 {
        let p = BiasMatrix::random_eps(7, 0.5, &mut r).unwrap();
        let res = disconnect_probability(&p, None, None, &[], MeasureMode::Exact, &Caps::default(), &mut r).unwrap();
        assert!(res.passed(), "{:?}", res.failures());
        let law = oracle::stationary(&p, None);
        for (k, v) in estimates(&res, "disconnect-probability") {
            let k = k as usize;
            let want = law.mass(|s| s[..k].iter().all(|&x| x <= k));
            assert!((v - want).abs() < 1e-12);
            assert!(v >= disconnect_product_bound(p.epsilon(), k) - 1e-12);
        }
    }
}

#[test]
fn identical_boundaries_have_zero_distance() {
    let (n, ell) = (30, 3);
    let p = BiasMatrix::constant(n, 0.75).unwrap();
    let window = LocalizationVector::constant(n, ell);
    let (eta, _) = extreme_left_boundaries(n, ell, 6).unwrap();
    let rs: Vec<usize> = (3..=20).collect();
    let targets = SpatialTargets::for_window(ell);
    let res = spatial_decay_curve(&p, &window, &eta, &eta, &rs, SpatialMode::Exact, &targets, &Caps::default(), &mut rng(42))
        .unwrap();
    assert!(estimates(&res, "tv").iter().all(|&(_, tv)| tv.abs() < 1e-12));
}

#[test]
fn spatial_decay_between_extremes() {
    let (n, ell) = (40, 2);
    let p = BiasMatrix::constant(n, 0.75).unwrap();
    let window = LocalizationVector::constant(n, ell);
    let (eta, eta_bar) = extreme_left_boundaries(n, ell, 4).unwrap();
    let rs: Vec<usize> = (2..=30).collect();
    let targets = SpatialTargets::for_window(ell);
    let res = spatial_decay_curve(&p, &window, &eta, &eta_bar, &rs, SpatialMode::Exact, &targets, &Caps::default(), &mut rng(43))
        .unwrap();
    assert!(res.passed(), "{:?}", res.failures());
    let tv = estimates(&res, "tv");
    assert!(tv[0].1 > 0.0);
    assert!(tv.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
}

#[test]
fn block_decomposition_small() {
    let caps = Caps::default();
    let p = BiasMatrix::constant(4, 0.6).unwrap();
    let we = BlockSchedule::west_east(4).unwrap();
    let res = block_decomposition_check(&p, None, &we, SelectionRule::SizeWeighted, &caps).unwrap();
    assert!(res.passed(), "{:?}", res.failures());

    let single = BlockSchedule::single(4);
    let res = block_decomposition_check(&p, None, &single, SelectionRule::SizeWeighted, &caps).unwrap();
    assert!(res.passed());
    let gap = |key: &str| res.parameters[key].as_f64().unwrap();
    assert!((gap("gap_blocks") - 1.0).abs() < 1e-9);
    assert!((gap("gap_inner_min") - gap("gap_chain")).abs() < 1e-9);

    let mut r = rng(44);
    let p5 = BiasMatrix::random_eps(5, 0.5, &mut r).unwrap();
    let ell = LocalizationVector::random_admissible(5, 2, &mut r);
    let we5 = BlockSchedule::west_east(5).unwrap();
    for rule in [SelectionRule::SizeWeighted, SelectionRule::Uniform] {
        let res = block_decomposition_check(&p5, Some(&ell), &we5, rule, &caps).unwrap();
        assert!(res.passed(), "{:?}", res.failures());
    }
}

#[test]
fn block_inverse_gap_is_finite() {
    let p = BiasMatrix::constant(6, 0.75).unwrap();
    let ell = LocalizationVector::constant(6, 2);
    let we = BlockSchedule::west_east(6).unwrap();
    let res = block_inverse_gap(&p, Some(&ell), &we, SelectionRule::SizeWeighted, Some(100.0), &Caps::default()).unwrap();
    assert!(res.passed(), "{:?}", res.failures());
}

#[test]
fn exact_mixing_times() {
    let caps = Caps::default();
    let res = mixing_exact(&[2], BiasFamily::ConstantQ { q: 0.6 }, 0.25, &caps).unwrap();
    assert_eq!(estimates(&res, "t-mix")[0].1, 1.0);

    let ns = [3, 4, 5];
    let mut prev: Option<Vec<f64>> = None;
    for delta in [0.1, 0.25, 0.4] {
        let t: Vec<f64> = estimates(&mixing_exact(&ns, BiasFamily::ConstantQ { q: 0.75 }, delta, &caps).unwrap(), "t-mix")
            .into_iter()
            .map(|x| x.1)
            .collect();
        assert!(t.windows(2).all(|w| w[0] <= w[1]), "not increasing in n: {t:?}");
        if let Some(prev) = prev {
            assert!(t.iter().zip(&prev).all(|(a, b)| a <= b), "not monotone in delta");
        }
        prev = Some(t);
    }
}

#[test]
fn lower_bound_far_from_the_front() {
    let p = BiasMatrix::constant(16, 0.75).unwrap();
    let res = lower_bound_experiment(&p, 0.999, 50, &LowerBoundSettings::default(), &Caps::default(), 45, 2).unwrap();
    assert!(estimates(&res, "particle-one-near-front").iter().all(|&(_, v)| v == 0.0));
    assert!(lower_bound_experiment(&p, 1.0, 10, &LowerBoundSettings::default(), &Caps::default(), 45, 1).is_err());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let p = BiasMatrix::constant(24, 0.75).unwrap();
    let checkpoints = [0, 100, 1_000, 5_000];
    let run = |jobs| {
        let res = burn_in_profile(&p, &StartState::Reversal, &checkpoints, 16, &BurnInThresholds::CALIBRATED, 46, jobs)
            .unwrap();
        serde_json::to_string(&res).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn results_round_trip_through_json() {
    let p = BiasMatrix::constant(5, 0.7).unwrap();
    let res = block_decomposition_check(&p, None, &BlockSchedule::west_east(5).unwrap(), SelectionRule::Uniform, &Caps::default())
        .unwrap();
    let back: ExperimentResult = serde_json::from_str(&serde_json::to_string_pretty(&res).unwrap()).unwrap();
    assert_eq!(back, res);

    let start = Permutation::reversal(5);
    let res = burn_in_profile(&p, &StartState::Custom(start.one_line().to_vec()), &[0, 10], 4, &BurnInThresholds::CALIBRATED, 47, 1)
        .unwrap();
    let back: ExperimentResult = serde_json::from_str(&serde_json::to_string(&res).unwrap()).unwrap();
    assert_eq!(back, res);
    assert!(res.series_csv().starts_with("series,x,estimate,stderr,replicas\n"));
}
