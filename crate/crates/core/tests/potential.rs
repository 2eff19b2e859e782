mod common;

use std::sync::Arc;

use alphapot::game_model::{Coefficient, DistributedCost, MeanFieldTanhDrift};
use alphapot::potential_eval::{
    estimate_linear_derivative, estimate_potential_lq, estimate_potential_sensitivity, estimate_second_derivative,
    estimate_value, potential_lq_samples, potential_sensitivity_samples, value_samples, ID_SECOND_DERIVATIVE_DIAGONAL,
};
use alphapot::sde_sim::{Direction, RMode};
use alphapot::{GeneralGameSpec, NoiseBatch, StrategyProfile, TimeGrid};
use common::{random_spec, rng};

fn profile(grid: &TimeGrid, n: usize) -> StrategyProfile {
    StrategyProfile::from_fn(grid, n, |i, t: f64| 0.5 * (2.0 * t + i as f64).sin() - 0.2)
}

fn dir(grid: &TimeGrid, phase: f64) -> Vec<f64> {
    grid.t[..grid.n_steps].iter().map(|t| (3.0 * t + phase).cos()).collect()
}

fn tanh_game(n: usize, sigma: f64) -> GeneralGameSpec {
    let drift = MeanFieldTanhDrift { c0: vec![0.1; n], c1: (0..n).map(|i| 0.4 + 0.1 * i as f64).collect(), lambda: 2.0 };
    let bounds = drift.bounds();
    GeneralGameSpec::new(
        1.0,
        Arc::new(drift),
        Arc::new(DistributedCost::heterogeneous(n)),
        vec![Coefficient::constant(sigma); n],
        (0..n).map(|i| 0.6 - 0.4 * i as f64).collect(),
        bounds,
    )
    .unwrap()
}

#[test]
fn representations_agree_on_random_specs() {
    let mut r = rng(23);
    for k in 0..3 {
        let spec = random_spec(&mut r, 2 + k % 2, 0.5, false, 0.3);
        let noise = NoiseBatch::new(100 + k as u64, 2000, TimeGrid::uniform(0.5, 50).unwrap(), spec.n_players, RMode::Quadrature(4)).unwrap();
        let prof = profile(&noise.grid, spec.n_players);
        let a = estimate_potential_lq(&spec, &prof, &noise).unwrap();
        let b = estimate_potential_sensitivity(&spec, &prof, &noise).unwrap();
        let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 3.0 * combined + 1e-9, "{} vs {} (se {combined})", a.value, b.value);
    }
}

#[test]
fn representations_agree_pathwise_without_noise() {
    let spec = random_spec(&mut rng(5), 3, 0.5, false, 0.0);
    let noise = NoiseBatch::new(1, 1, TimeGrid::uniform(0.5, 200).unwrap(), 3, RMode::Quadrature(4)).unwrap();
    let prof = profile(&noise.grid, 3);
    let a = potential_lq_samples(&spec, &prof, &noise).unwrap()[0];
    let b = potential_sensitivity_samples(&spec, &prof, &noise).unwrap()[0];
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn quadrature_beyond_two_nodes_changes_nothing() {
    let spec = random_spec(&mut rng(6), 2, 0.4, false, 0.3);
    let noise = NoiseBatch::new(2, 50, TimeGrid::uniform(0.4, 40).unwrap(), 2, RMode::Quadrature(4)).unwrap();
    let prof = profile(&noise.grid, 2);
    let four = potential_lq_samples(&spec, &prof, &noise).unwrap();
    let eight = potential_lq_samples(&spec, &prof, &noise.with_r_mode(RMode::Quadrature(8)).unwrap()).unwrap();
    for (a, b) in four.iter().zip(&eight) {
        assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }
}

#[test]
fn single_player_potential_is_the_value_change() {
    let spec = random_spec(&mut rng(7), 1, 0.5, false, 0.4);
    let noise = NoiseBatch::new(3, 64, TimeGrid::uniform(0.5, 50).unwrap(), 1, RMode::Quadrature(3)).unwrap();
    let (u, zero) = (profile(&noise.grid, 1), StrategyProfile::zero(&noise.grid, 1));
    let dphi: Vec<f64> = potential_lq_samples(&spec, &u, &noise)
        .unwrap()
        .iter()
        .zip(potential_lq_samples(&spec, &zero, &noise).unwrap())
        .map(|(a, b)| a - b)
        .collect();
    let dv: Vec<f64> = value_samples(&spec, &u, &noise, 0)
        .unwrap()
        .iter()
        .zip(value_samples(&spec, &zero, &noise, 0).unwrap())
        .map(|(a, b)| a - b)
        .collect();
    for (a, b) in dphi.iter().zip(&dv) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn linear_derivative_matches_central_difference() {
    let game = tanh_game(3, 0.0);
    let noise = NoiseBatch::new(0, 1, TimeGrid::uniform(1.0, 200).unwrap(), 3, RMode::Sampled).unwrap();
    let base = profile(&noise.grid, 3);
    let d = dir(&noise.grid, 0.7);
    let eps = 1e-5;
    for (i, h) in [(0, 0), (0, 2), (2, 1)] {
        let ld = estimate_linear_derivative(&game, &base, &noise, i, h, &d).unwrap();
        assert_eq!(ld.std_error, 0.0);
        let v = |e: f64| estimate_value(&game, &base.perturbed(h, Direction::Path(d.clone()), e).unwrap(), &noise, i).unwrap().value;
        let fd = (v(eps) - v(-eps)) / (2.0 * eps);
        assert!((ld.value - fd).abs() <= 1e-3 * fd.abs().max(1e-8), "({i},{h}): {} vs {fd}", ld.value);
    }
}

#[test]
fn second_derivative_matches_difference_of_first() {
    let game = tanh_game(3, 0.0);
    let noise = NoiseBatch::new(0, 1, TimeGrid::uniform(1.0, 200).unwrap(), 3, RMode::Sampled).unwrap();
    let base = profile(&noise.grid, 3);
    let (dh, dl) = (dir(&noise.grid, 0.7), dir(&noise.grid, 2.0));
    let eps = 1e-4;
    for (i, h, l) in [(0, 1, 2), (1, 0, 1), (2, 2, 0), (1, 1, 1)] {
        let sd = estimate_second_derivative(&game, &base, &noise, i, (h, l), &dh, &dl).unwrap();
        if h == l {
            assert_eq!(sd.estimator_id, ID_SECOND_DERIVATIVE_DIAGONAL);
        }
        let first = |e: f64| {
            let p = base.perturbed(l, Direction::Path(dl.clone()), e).unwrap();
            estimate_linear_derivative(&game, &p, &noise, i, h, &dh).unwrap().value
        };
        let fd = (first(eps) - first(-eps)) / (2.0 * eps);
        assert!((sd.value - fd).abs() <= 2e-2 * fd.abs().max(1e-6), "({i},{h},{l}): {} vs {fd}", sd.value);
    }
}

#[test]
fn stochastic_linear_derivative_tracks_paired_difference() {
    let game = tanh_game(2, 0.5);
    let noise = NoiseBatch::new(4, 400, TimeGrid::uniform(1.0, 100).unwrap(), 2, RMode::Sampled).unwrap();
    let base = profile(&noise.grid, 2);
    let d = dir(&noise.grid, 0.1);
    let eps = 1e-5;
    let ld = estimate_linear_derivative(&game, &base, &noise, 1, 0, &d).unwrap();
    let v = |e: f64| estimate_value(&game, &base.perturbed(0, Direction::Path(d.clone()), e).unwrap(), &noise, 1).unwrap().value;
    let fd = (v(eps) - v(-eps)) / (2.0 * eps);
    assert!((ld.value - fd).abs() <= 1e-4 * fd.abs().max(1e-6), "{} vs {fd}", ld.value);
}
