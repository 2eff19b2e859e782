//! Monte Carlo estimates of player values, of the potential in its LQ and sensitivity
//! representations, and of first and second linear derivatives of the values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{build_lifted_matrices, DifferentialGame, LqGameSpec};
use crate::linalg::{dot, Mat};
use crate::ode_solvers::TimeGrid;
use crate::scalar::{mean_and_stderr, pairwise_sum, Scalar};
use crate::sde_sim::kernels::{euler_lifted, euler_second_sensitivity, euler_sensitivity, euler_state, LqTables};
use crate::sde_sim::{NoiseBatch, StrategyProfile};

pub const ID_VALUE: &str = "value";
pub const ID_POTENTIAL_LQ: &str = "potential_lq";
pub const ID_POTENTIAL_SENSITIVITY: &str = "potential_sensitivity";
pub const ID_LINEAR_DERIVATIVE: &str = "linear_derivative";
pub const ID_SECOND_DERIVATIVE: &str = "second_derivative";
/// Same-player second derivative: the sensitivity dynamics are applied with `h = ℓ`.
pub const ID_SECOND_DERIVATIVE_DIAGONAL: &str = "second_derivative_diagonal_extension";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n_steps: usize,
    pub horizon: f64,
}

impl GridInfo {
    pub fn of<S: Scalar>(g: &TimeGrid<S>) -> Self {
        Self { n_steps: g.n_steps, horizon: g.horizon().as_f64() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub estimator_id: String,
    pub grid: GridInfo,
}

impl McEstimate {
    pub fn from_samples<S: Scalar>(samples: &[S], noise: &NoiseBatch<S>, id: &str) -> Result<Self> {
        let (m, se) = mean_and_stderr(samples);
        if !m.is_finite() {
            return Err(Error::NonFinite { what: "estimate", path: 0, step: 0 });
        }
        Ok(Self {
            value: m.as_f64(),
            std_error: se.as_f64(),
            n_paths: samples.len(),
            seed: noise.seed,
            estimator_id: id.to_string(),
            grid: GridInfo::of(&noise.grid),
        })
    }

    /// Paired difference `a − b` of per-path samples on common noise.
    pub fn paired<S: Scalar>(a: &[S], b: &[S], noise: &NoiseBatch<S>, id: &str) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension("paired samples differ in length".into()));
        }
        let d: Vec<S> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
        Self::from_samples(&d, noise, id)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

fn check_inputs<S: Scalar>(n: usize, profile: &StrategyProfile<S>, noise: &NoiseBatch<S>) -> Result<()> {
    crate::sde_sim::check_grids(profile.grid(), &noise.grid)?;
    crate::sde_sim::check_noise_dims(noise, n)?;
    if profile.n_players() != n {
        return Err(Error::Dimension(format!("profile has {} players, game has {n}", profile.n_players())));
    }
    Ok(())
}

/// `Σ_k Δt_k f_i(t_k, X_k, u_k) + g_i(X_T)` on one path.
fn path_cost<S: Scalar>(game: &dyn DifferentialGame<S>, grid: &TimeGrid<S>, x: &[S], u: &[S], i: usize) -> S {
    let n = game.n_players();
    let cost = game.cost();
    let running: Vec<S> = (0..grid.n_steps)
        .map(|k| grid.dt(k) * cost.running(i, grid.t[k], &x[k * n..(k + 1) * n], &u[k * n..(k + 1) * n]))
        .collect();
    pairwise_sum(&running) + cost.terminal(i, &x[grid.n_steps * n..])
}

fn ensure_finite<S: Scalar>(v: S, what: &'static str, path: usize) -> Result<S> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, path, step: 0 })
    }
}

/// Per-path samples of every player's cost, `[path][player]`.
pub fn all_value_samples<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<Vec<Vec<S>>> {
    let n = game.n_players();
    check_inputs(n, profile, noise)?;
    (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let x = euler_state(game, &noise.grid, &real.u, &dw, p)?;
            (0..n).map(|i| ensure_finite(path_cost(game, &noise.grid, &x, &real.u, i), "cost", p)).collect()
        })
        .collect()
}

pub fn value_samples<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
) -> Result<Vec<S>> {
    check_player(game.n_players(), i)?;
    Ok(all_value_samples(game, profile, noise)?.into_iter().map(|v| v[i]).collect())
}

fn check_player(n: usize, i: usize) -> Result<()> {
    if i >= n {
        return Err(Error::InvalidArgument(format!("player {i} out of range for N = {n}")));
    }
    Ok(())
}

pub fn estimate_value<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
) -> Result<McEstimate> {
    McEstimate::from_samples(&value_samples(game, profile, noise, i)?, noise, ID_VALUE)
}

fn require_quadrature<S: Scalar>(noise: &NoiseBatch<S>) -> Result<(&[S], &[S])> {
    noise.quadrature().ok_or_else(|| {
        Error::InvalidArgument("potential estimators need a batch with quadrature r, not sampled r".into())
    })
}

/// Per-path samples of the LQ potential: for each quadrature node `r`, the lifted pair
/// is simulated and `Σ_k Δt(𝕩ᵀQ𝕩 + 2r|u|²) + 𝕩_Tᵀ Q̄ 𝕩_T + 2𝔭ᵀ𝕩_T` accumulated with the node weight.
pub fn potential_lq_samples<S: Scalar>(
    spec: &LqGameSpec<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<Vec<S>> {
    let n = spec.n_players;
    check_inputs(n, profile, noise)?;
    let (nodes, weights) = require_quadrature(noise)?;
    let lifted = build_lifted_matrices(spec);
    let tab = LqTables::new(spec, &noise.grid);
    let grid = &noise.grid;
    let d2 = 2 * n;
    (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let mut total = S::zero();
            for (&r, &w) in nodes.iter().zip(weights) {
                let xx = euler_lifted(&tab, grid, &real.u, &dw, r, p)?;
                let running: Vec<S> = (0..grid.n_steps)
                    .map(|k| {
                        let v = &xx[k * d2..(k + 1) * d2];
                        let uk = &real.u[k * n..(k + 1) * n];
                        grid.dt(k) * (lifted.q.quad_form(v, v) + S::two() * r * dot(uk, uk))
                    })
                    .collect();
                let vt = &xx[grid.n_steps * d2..];
                let terminal = lifted.q_bar.quad_form(vt, vt) + S::two() * dot(&lifted.p_vec, vt);
                total += w * (pairwise_sum(&running) + terminal);
            }
            ensure_finite(total, "potential", p)
        })
        .collect()
}

pub fn estimate_potential_lq<S: Scalar>(
    spec: &LqGameSpec<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<McEstimate> {
    McEstimate::from_samples(&potential_lq_samples(spec, profile, noise)?, noise, ID_POTENTIAL_LQ)
}

/// Per-path samples of the sensitivity representation
/// `∫_0^1 Σ_i [Σ_k Δt (Y·∂_x f_i + u_i ∂_{u_i} f_i)(t_k, X^{ru}, ru) + ∂_x g_i(X^{ru}_T)·Y_T] dr`
/// with `Y = Y^{ru, u_i}` and the `r`-integral over the batch's quadrature nodes.
pub fn potential_sensitivity_samples<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<Vec<S>> {
    let n = game.n_players();
    check_inputs(n, profile, noise)?;
    let (nodes, weights) = require_quadrature(noise)?;
    let grid = &noise.grid;
    let cost = game.cost();
    (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let mut gx = vec![S::zero(); n];
            let mut gu = vec![S::zero(); n];
            let mut total = S::zero();
            for (&r, &w) in nodes.iter().zip(weights) {
                let ru: Vec<S> = real.u.iter().map(|v| r * *v).collect();
                let x = euler_state(game, grid, &ru, &dw, p)?;
                let mut node_sum = S::zero();
                for i in 0..n {
                    let dir: Vec<S> = (0..grid.n_steps).map(|k| real.u[k * n + i]).collect();
                    let y = euler_sensitivity(game, grid, &x, i, &dir, p)?;
                    let running: Vec<S> = (0..grid.n_steps)
                        .map(|k| {
                            let t = grid.t[k];
                            cost.running_grad(i, t, &x[k * n..(k + 1) * n], &ru[k * n..(k + 1) * n], &mut gx, &mut gu);
                            grid.dt(k) * (dot(&y[k * n..(k + 1) * n], &gx) + dir[k] * gu[i])
                        })
                        .collect();
                    cost.terminal_grad(i, &x[grid.n_steps * n..], &mut gx);
                    node_sum += pairwise_sum(&running) + dot(&gx, &y[grid.n_steps * n..]);
                }
                total += w * node_sum;
            }
            ensure_finite(total, "potential", p)
        })
        .collect()
}

pub fn estimate_potential_sensitivity<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<McEstimate> {
    McEstimate::from_samples(&potential_sensitivity_samples(game, profile, noise)?, noise, ID_POTENTIAL_SENSITIVITY)
}

/// Per-path samples of `δV_i/δu_h(u; u'_h)` for the deterministic direction `dir`.
pub fn linear_derivative_samples<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
    h: usize,
    dir: &[S],
) -> Result<Vec<S>> {
    let n = game.n_players();
    check_inputs(n, profile, noise)?;
    check_player(n, i)?;
    check_player(n, h)?;
    check_len(dir, &noise.grid)?;
    let grid = &noise.grid;
    let cost = game.cost();
    (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let x = euler_state(game, grid, &real.u, &dw, p)?;
            let y = euler_sensitivity(game, grid, &x, h, dir, p)?;
            let mut gx = vec![S::zero(); n];
            let mut gu = vec![S::zero(); n];
            let running: Vec<S> = (0..grid.n_steps)
                .map(|k| {
                    cost.running_grad(i, grid.t[k], &x[k * n..(k + 1) * n], &real.u[k * n..(k + 1) * n], &mut gx, &mut gu);
                    grid.dt(k) * (dot(&y[k * n..(k + 1) * n], &gx) + dir[k] * gu[h])
                })
                .collect();
            cost.terminal_grad(i, &x[grid.n_steps * n..], &mut gx);
            ensure_finite(pairwise_sum(&running) + dot(&gx, &y[grid.n_steps * n..]), "linear derivative", p)
        })
        .collect()
}

fn check_len<S: Scalar>(dir: &[S], grid: &TimeGrid<S>) -> Result<()> {
    if dir.len() != grid.n_steps {
        return Err(Error::GridMismatch(format!("direction has {} steps, grid has {}", dir.len(), grid.n_steps)));
    }
    Ok(())
}

pub fn estimate_linear_derivative<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
    h: usize,
    dir: &[S],
) -> Result<McEstimate> {
    McEstimate::from_samples(&linear_derivative_samples(game, profile, noise, i, h, dir)?, noise, ID_LINEAR_DERIVATIVE)
}

/// Per-path samples of `δ²V_i/δu_h δu_ℓ(u; u'_h, u''_ℓ)`: the Hessian of `(f_i, g_i)` in
/// the two sensitivity directions plus the gradient paired with the second-order sensitivity.
#[allow(clippy::too_many_arguments)]
pub fn second_derivative_samples<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
    (h, l): (usize, usize),
    dir_h: &[S],
    dir_l: &[S],
) -> Result<Vec<S>> {
    let n = game.n_players();
    check_inputs(n, profile, noise)?;
    for p in [i, h, l] {
        check_player(n, p)?;
    }
    check_len(dir_h, &noise.grid)?;
    check_len(dir_l, &noise.grid)?;
    let grid = &noise.grid;
    let cost = game.cost();
    (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let x = euler_state(game, grid, &real.u, &dw, p)?;
            let yh = euler_sensitivity(game, grid, &x, h, dir_h, p)?;
            let yl = euler_sensitivity(game, grid, &x, l, dir_l, p)?;
            let z = euler_second_sensitivity(game, grid, &x, &yh, &yl, p)?;
            let mut gx = vec![S::zero(); n];
            let mut gu = vec![S::zero(); n];
            let (mut hxx, mut hxu, mut huu) = (Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n));
            let running: Vec<S> = (0..grid.n_steps)
                .map(|k| {
                    let (t, xk, uk) = (grid.t[k], &x[k * n..(k + 1) * n], &real.u[k * n..(k + 1) * n]);
                    let (a, b) = (&yh[k * n..(k + 1) * n], &yl[k * n..(k + 1) * n]);
                    cost.running_hess(i, t, xk, uk, &mut hxx, &mut hxu, &mut huu);
                    cost.running_grad(i, t, xk, uk, &mut gx, &mut gu);
                    let mut q = hxx.quad_form(a, b) + huu[(h, l)] * dir_h[k] * dir_l[k];
                    for c in 0..n {
                        q += a[c] * hxu[(c, l)] * dir_l[k] + b[c] * hxu[(c, h)] * dir_h[k];
                    }
                    grid.dt(k) * (q + dot(&gx, &z[k * n..(k + 1) * n]))
                })
                .collect();
            let xt = &x[grid.n_steps * n..];
            cost.terminal_hess(i, xt, &mut hxx);
            cost.terminal_grad(i, xt, &mut gx);
            let end = grid.n_steps * n;
            let terminal = hxx.quad_form(&yh[end..], &yl[end..]) + dot(&gx, &z[end..]);
            ensure_finite(pairwise_sum(&running) + terminal, "second derivative", p)
        })
        .collect()
}

/// Tagged with [`ID_SECOND_DERIVATIVE_DIAGONAL`] when `h == ℓ`.
pub fn estimate_second_derivative<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
    (h, l): (usize, usize),
    dir_h: &[S],
    dir_l: &[S],
) -> Result<McEstimate> {
    let s = second_derivative_samples(game, profile, noise, i, (h, l), dir_h, dir_l)?;
    let id = if h == l { ID_SECOND_DERIVATIVE_DIAGONAL } else { ID_SECOND_DERIVATIVE };
    McEstimate::from_samples(&s, noise, id)
}

/// Discrete gradient of `V_i` with respect to a deterministic shift of player `i`'s
/// control, as a density per unit time: the directional derivative along `dir` is
/// `Σ_k Δt_k g_k dir_k`. Computed by the adjoint of the Euler scheme and averaged over paths.
pub fn value_gradient_density<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    i: usize,
) -> Result<Vec<S>> {
    let n = game.n_players();
    check_inputs(n, profile, noise)?;
    check_player(n, i)?;
    let grid = &noise.grid;
    let steps = grid.n_steps;
    let cost = game.cost();
    let drift = game.drift();
    let coupled = !drift.is_decoupled();
    let per_path = (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let x = euler_state(game, grid, &real.u, &dw, p)?;
            let mut lam = vec![S::zero(); n];
            cost.terminal_grad(i, &x[steps * n..], &mut lam);
            let mut gx = vec![S::zero(); n];
            let mut gu = vec![S::zero(); n];
            let mut buf = vec![S::zero(); n];
            let mut next = vec![S::zero(); n];
            let mut g = vec![S::zero(); steps];
            for k in (0..steps).rev() {
                let (t, dt) = (grid.t[k], grid.dt(k));
                let xk = &x[k * n..(k + 1) * n];
                cost.running_grad(i, t, xk, &real.u[k * n..(k + 1) * n], &mut gx, &mut gu);
                g[k] = gu[i] + lam[i];
                for l in 0..n {
                    next[l] = lam[l] + dt * (gx[l] + drift.d_own(l, t, xk[l], xk) * lam[l]);
                }
                if coupled {
                    for j in 0..n {
                        drift.d_pop(j, t, xk[j], xk, &mut buf);
                        for l in 0..n {
                            next[l] += dt * buf[l] * lam[j];
                        }
                    }
                }
                std::mem::swap(&mut lam, &mut next);
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = S::of_usize(per_path.len());
    Ok((0..steps).map(|k| per_path.iter().map(|g| g[k]).sum::<S>() / m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_sim::RMode;

    fn spec(sigma: f64, q: Mat<f64>, gamma: Vec<f64>, d: Vec<f64>, x0: Vec<f64>) -> LqGameSpec<f64> {
        LqGameSpec::with_constants(1.0, q, gamma, d, 0.0, sigma, x0).unwrap()
    }

    #[test]
    fn frozen_state_value_is_terminal_gap() {
        let s = spec(0.0, Mat::zeros(2, 2), vec![1.0; 2], vec![0.5, -1.0], vec![2.0, 1.0]);
        let g = TimeGrid::uniform(1.0, 20).unwrap();
        let noise = NoiseBatch::new(0, 1, g.clone(), 2, RMode::Sampled).unwrap();
        let v = estimate_value(&s, &StrategyProfile::zero(&g, 2), &noise, 1).unwrap();
        assert_eq!(v.value, 4.0);
        assert_eq!(v.std_error, 0.0);
    }

    #[test]
    fn brownian_value_adds_horizon() {
        let s = spec(1.0, Mat::zeros(1, 1), vec![1.0], vec![0.0], vec![1.0]);
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let noise = NoiseBatch::new(4, 20_000, g.clone(), 1, RMode::Sampled).unwrap();
        let v = estimate_value(&s, &StrategyProfile::zero(&g, 1), &noise, 0).unwrap();
        assert!((v.value - 2.0).abs() <= 3.0 * v.std_error + 1e-9, "{v:?}");
    }

    #[test]
    fn potentials_vanish_at_zero_control_without_targets() {
        let q = Mat::from_rows(&[vec![0.0, 2.0], vec![0.5, 0.0]]).unwrap();
        let s = spec(0.7, q, vec![1.0, 2.0], vec![0.0, 0.0], vec![1.0, -0.5]);
        let g = TimeGrid::uniform(1.0, 30).unwrap();
        let noise = NoiseBatch::new(1, 50, g.clone(), 2, RMode::Quadrature(4)).unwrap();
        let zero = StrategyProfile::zero(&g, 2);
        assert_eq!(estimate_potential_lq(&s, &zero, &noise).unwrap().value, 0.0);
        assert_eq!(estimate_potential_sensitivity(&s, &zero, &noise).unwrap().value, 0.0);
        let sampled = noise.with_r_mode(RMode::Sampled).unwrap();
        assert!(estimate_potential_lq(&s, &zero, &sampled).is_err());
    }

    #[test]
    fn derivative_linear_in_direction() {
        let q = Mat::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let s = spec(0.3, q, vec![1.0, 0.5], vec![1.0, 0.0], vec![0.2, -0.4]);
        let g = TimeGrid::uniform(1.0, 40).unwrap();
        let noise = NoiseBatch::new(8, 20, g.clone(), 2, RMode::Sampled).unwrap();
        let prof = StrategyProfile::from_fn(&g, 2, |i, t| 0.3 * i as f64 - t);
        let dir: Vec<f64> = g.t[..40].iter().map(|t| t.cos()).collect();
        let dir2: Vec<f64> = dir.iter().map(|v| 2.0 * v).collect();
        let a = estimate_linear_derivative(&s, &prof, &noise, 0, 1, &dir).unwrap();
        let b = estimate_linear_derivative(&s, &prof, &noise, 0, 1, &dir2).unwrap();
        assert!((b.value - 2.0 * a.value).abs() <= 1e-12 * a.value.abs().max(1.0));
        let z = estimate_linear_derivative(&s, &prof, &noise, 0, 1, &[0.0; 40]).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn adjoint_gradient_matches_linear_derivative() {
        let q = Mat::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let s = LqGameSpec::with_constants(1.0, q, vec![1.0, 0.5], vec![1.0, 0.0], 0.4, 0.0, vec![0.2, -0.4]).unwrap();
        let g = TimeGrid::uniform(1.0, 40).unwrap();
        let noise = NoiseBatch::new(0, 1, g.clone(), 2, RMode::Sampled).unwrap();
        let prof = StrategyProfile::from_fn(&g, 2, |i, t| 0.3 * i as f64 - t);
        let dir: Vec<f64> = g.t[..40].iter().map(|t| (3.0 * t).sin()).collect();
        let grad = value_gradient_density(&s, &prof, &noise, 1).unwrap();
        let via_adjoint: f64 = (0..40).map(|k| g.dt(k) * grad[k] * dir[k]).sum();
        let via_sens = estimate_linear_derivative(&s, &prof, &noise, 1, 1, &dir).unwrap().value;
        assert!((via_adjoint - via_sens).abs() < 1e-12, "{via_adjoint} vs {via_sens}");
    }

    #[test]
    fn estimate_serializes() {
        let s = spec(0.0, Mat::zeros(1, 1), vec![1.0], vec![0.0], vec![1.0]);
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let noise = NoiseBatch::new(42, 1, g.clone(), 1, RMode::Sampled).unwrap();
        let e = estimate_value(&s, &StrategyProfile::zero(&g, 1), &noise, 0).unwrap();
        let j = e.to_json();
        assert_eq!(j["seed"], 42);
        assert_eq!(j["estimator_id"], "value");
        assert_eq!(j["grid"]["n_steps"], 10);
    }
}
