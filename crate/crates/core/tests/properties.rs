use alphapot::alpha_bounds::{asymmetry_index, lq_alpha_bound, regime_decay_fit};
use alphapot::game_model::{parse_game_spec, to_canonical_json, Coefficient};
use alphapot::ne_verify::{check_alpha_potential, sample_deviations, time_bump, AlphaCheckOptions, DeviationKind, PhiEstimator};
use alphapot::sde_sim::{Direction, RMode};
use alphapot::{LqGameSpec, Mat, NoiseBatch, StrategyProfile, TimeGrid};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(0.0..3.0f64, n * n).prop_map(move |v| {
        let mut m = Mat::from_vec(n, n, v).unwrap();
        for i in 0..n {
            m[(i, i)] = 0.0;
        }
        m
    })
}

fn spec_strategy() -> impl Strategy<Value = LqGameSpec> {
    (2usize..=4).prop_flat_map(|n| {
        (
            weights(n),
            prop::collection::vec(0.1..2.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            -0.5..0.5f64,
            0.2..1.0f64,
        )
            .prop_map(|(q, gamma, d, x0, a, t)| LqGameSpec::with_constants(t, q, gamma, d, a, 0.0, x0).unwrap())
    })
}

fn realized(profile: &StrategyProfile, n: usize) -> Vec<Vec<f64>> {
    let u = profile.realize(&[]).u;
    (0..n).map(|i| u.iter().skip(i).step_by(n).copied().collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn asymmetry_vanishes_exactly_for_symmetric_weights(q in weights(5)) {
        let sym = Mat::from_fn(5, 5, |i, j| q[(i, j)] + q[(j, i)]);
        prop_assert_eq!(asymmetry_index(&sym).unwrap(), 0.0);
        prop_assert!(asymmetry_index(&q).unwrap() >= 0.0);
        prop_assert_eq!(asymmetry_index(&q).unwrap(), asymmetry_index(&q.transpose()).unwrap());
    }

    #[test]
    fn lq_bound_is_linear_in_envelope(spec in spec_strategy(), c in 0.0..10.0f64) {
        let one = lq_alpha_bound(&spec, 1.0).unwrap();
        let scaled = lq_alpha_bound(&spec, c).unwrap();
        prop_assert!((scaled - c * one).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn canonical_json_round_trips(spec in spec_strategy()) {
        let text = to_canonical_json(&spec);
        let back: LqGameSpec = parse_game_spec(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(to_canonical_json(&back), text);
    }

    #[test]
    fn decay_fit_recovers_exact_power_laws(slope in -2.0..-0.1f64, c in 0.01..10.0f64) {
        let ns = [4.0, 8.0, 16.0, 32.0];
        let alphas: Vec<f64> = ns.iter().map(|n: &f64| c * n.powf(slope)).collect();
        let fit = regime_decay_fit(&ns, &alphas).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn deviations_touch_only_their_player(seed in 0u64..1000, player in 0usize..3, kind in 0usize..3) {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let base = StrategyProfile::from_fn(&grid, 3, |i, t: f64| i as f64 - t);
        let kind = [DeviationKind::Scaled, DeviationKind::TimeBump, DeviationKind::RandomPath][kind];
        let before = realized(&base, 3);
        for dev in sample_deviations(&base, player, kind, 4, seed, 1e6).unwrap() {
            let after = realized(&dev.profile, 3);
            for i in (0..3).filter(|&i| i != player) {
                prop_assert!(before[i].iter().zip(&after[i]).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }

    #[test]
    fn clipped_paths_respect_the_control_bound(seed in 0u64..1000, bound in 0.01..0.5f64) {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let base = StrategyProfile::zero(&grid, 2);
        for dev in sample_deviations(&base, 1, DeviationKind::RandomPath, 8, seed, bound).unwrap() {
            prop_assert!(dev.param <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn trial_gap_is_symmetric_under_swapping(spec in spec_strategy(), c in -1.0..1.0f64) {
        let n = spec.n_players;
        let noise = NoiseBatch::new(0, 1, TimeGrid::uniform(spec.horizon, 40).unwrap(), n, RMode::Quadrature(2)).unwrap();
        let base = StrategyProfile::from_fn(&noise.grid, n, |i, t: f64| 0.3 * i as f64 + t);
        let dev = time_bump(&base, 0, c, 0.0, spec.horizon, 1e6).unwrap();
        let reverse = alphapot::ne_verify::Deviation { profile: base.clone(), ..dev.clone() };
        let opts = AlphaCheckOptions { alpha_reference: 0.0, abs_tol: 1e-6 };
        let fwd = check_alpha_potential(&spec, PhiEstimator::Lq(&spec), &base, std::slice::from_ref(&dev), &noise, opts).unwrap();
        let bwd = check_alpha_potential(&spec, PhiEstimator::Lq(&spec), &dev.profile, &[reverse], &noise, opts).unwrap();
        let (f, b) = (&fwd.trials[0], &bwd.trials[0]);
        let tol = 1e-9 * (1.0 + f.d_v.value.abs() + f.d_phi.value.abs());
        prop_assert!((f.d_v.value + b.d_v.value).abs() <= tol);
        prop_assert!((f.d_phi.value + b.d_phi.value).abs() <= tol);
        prop_assert!((f.gap - b.gap).abs() <= tol);
        prop_assert_eq!(f.gap_std_error, 0.0);
    }
}

#[test]
fn identity_deviations_reproduce_the_base() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let base = StrategyProfile::from_fn(&grid, 2, |i, t: f64| (i as f64 + 1.0) * t);
    let scaled = base.perturbed(0, Direction::OwnControl, 0.0).unwrap();
    let bump = time_bump(&base, 1, 0.0, 0.2, 0.7, 1e6).unwrap();
    assert_eq!(realized(&scaled, 2), realized(&base, 2));
    assert_eq!(realized(&bump.profile, 2), realized(&base, 2));
}

#[test]
fn enlarging_the_deviation_set_never_lowers_the_max_gap() {
    let q = Mat::from_rows(&[vec![0.0, 2.0, 0.5], vec![0.0, 0.0, 1.0], vec![0.3, 0.0, 0.0]]).unwrap();
    let spec = LqGameSpec::new(
        1.0,
        q,
        vec![1.0; 3],
        vec![0.5, -0.5, 0.0],
        vec![Coefficient::constant(0.2); 3],
        vec![Coefficient::constant(0.0); 3],
        vec![0.1, 0.2, -0.3],
        1e6,
    )
    .unwrap();
    let noise = NoiseBatch::new(0, 1, TimeGrid::uniform(1.0, 50).unwrap(), 3, RMode::Quadrature(2)).unwrap();
    let base = StrategyProfile::from_fn(&noise.grid, 3, |i, _| 0.5 + i as f64);
    let devs = sample_deviations(&base, 1, DeviationKind::RandomPath, 12, 9, 1e6).unwrap();
    let opts = AlphaCheckOptions { alpha_reference: 0.0, abs_tol: 1e-6 };
    let mut last = 0.0;
    for k in 1..=devs.len() {
        let rep = check_alpha_potential(&spec, PhiEstimator::Lq(&spec), &base, &devs[..k], &noise, opts).unwrap();
        assert!(rep.max_gap >= last);
        last = rep.max_gap;
    }
    assert!(last > 0.0);
}
