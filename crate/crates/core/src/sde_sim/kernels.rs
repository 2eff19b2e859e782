//! Single-path Euler steppers. Every trajectory is stored row-major as `[knot][dim]`
//! and controls or increments as `[step][dim]`.

use crate::error::{Error, Result};
use crate::game_model::{DifferentialGame, LqGameSpec};
use crate::linalg::Mat;
use crate::ode_solvers::TimeGrid;
use crate::scalar::Scalar;

fn check_row<S: Scalar>(row: &[S], what: &'static str, path: usize, step: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, path, step })
    }
}

/// `X_{k+1,i} = X_{k,i} + (b_i(t_k, X_{k,i}, X_k) + u_{k,i})Δt + σ_i(t_k)ΔW_k^i`.
pub fn euler_state<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    grid: &TimeGrid<S>,
    u: &[S],
    dw: &[S],
    path: usize,
) -> Result<Vec<S>> {
    let n = game.n_players();
    let steps = grid.n_steps;
    let drift = game.drift();
    let mut x = vec![S::zero(); (steps + 1) * n];
    x[..n].copy_from_slice(game.initial_state());
    for k in 0..steps {
        let t = grid.t[k];
        let dt = grid.dt(k);
        let (head, tail) = x.split_at_mut((k + 1) * n);
        let cur = &head[k * n..];
        let next = &mut tail[..n];
        for i in 0..n {
            let b = drift.value(i, t, cur[i], cur);
            next[i] = cur[i] + (b + u[k * n + i]) * dt + game.volatility(i, t) * dw[k * n + i];
        }
        check_row(next, "state", path, k + 1)?;
    }
    Ok(x)
}

/// `Jv` for the drift Jacobian at `(t, x)`: `(Jv)_i = ∂_x b_i v_i + Σ_j ∂_{y_j} b_i v_j`.
fn jacobian_apply<S: Scalar>(game: &dyn DifferentialGame<S>, t: S, x: &[S], v: &[S], buf: &mut [S], out: &mut [S]) {
    let drift = game.drift();
    let coupled = !drift.is_decoupled();
    for i in 0..x.len() {
        let mut acc = drift.d_own(i, t, x[i], x) * v[i];
        if coupled {
            drift.d_pop(i, t, x[i], x, buf);
            acc += crate::linalg::dot(buf, v);
        }
        out[i] = acc;
    }
}

/// First-order sensitivity of the state to player `h`'s control in direction `dir`
/// (one value per step), driven by the realized state path `x`.
pub fn euler_sensitivity<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    grid: &TimeGrid<S>,
    x: &[S],
    h: usize,
    dir: &[S],
    path: usize,
) -> Result<Vec<S>> {
    let n = game.n_players();
    let steps = grid.n_steps;
    let mut y = vec![S::zero(); (steps + 1) * n];
    let mut buf = vec![S::zero(); n];
    let mut jy = vec![S::zero(); n];
    for k in 0..steps {
        let t = grid.t[k];
        let dt = grid.dt(k);
        jacobian_apply(game, t, &x[k * n..(k + 1) * n], &y[k * n..(k + 1) * n], &mut buf, &mut jy);
        for i in 0..n {
            let push = if i == h { dir[k] } else { S::zero() };
            y[(k + 1) * n + i] = y[k * n + i] + (jy[i] + push) * dt;
        }
        check_row(&y[(k + 1) * n..(k + 2) * n], "sensitivity", path, k + 1)?;
    }
    Ok(y)
}

/// Second-order sensitivity driven by `x` and two first-order sensitivities, with the
/// drift-Hessian quadratic form of `(Y^h_i, Y^h)` and `(Y^ℓ_i, Y^ℓ)` as source.
pub fn euler_second_sensitivity<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    grid: &TimeGrid<S>,
    x: &[S],
    yh: &[S],
    yl: &[S],
    path: usize,
) -> Result<Vec<S>> {
    let n = game.n_players();
    let steps = grid.n_steps;
    let drift = game.drift();
    let coupled = !drift.is_decoupled();
    let mut z = vec![S::zero(); (steps + 1) * n];
    let mut buf = vec![S::zero(); n];
    let mut jz = vec![S::zero(); n];
    let mut hess = Mat::zeros(n, n);
    for k in 0..steps {
        let t = grid.t[k];
        let dt = grid.dt(k);
        let xk = &x[k * n..(k + 1) * n];
        let (a, b) = (&yh[k * n..(k + 1) * n], &yl[k * n..(k + 1) * n]);
        jacobian_apply(game, t, xk, &z[k * n..(k + 1) * n], &mut buf, &mut jz);
        for i in 0..n {
            let mut src = drift.d2_own(i, t, xk[i], xk) * a[i] * b[i];
            if coupled {
                drift.d2_own_pop(i, t, xk[i], xk, &mut buf);
                for j in 0..n {
                    src += buf[j] * (a[i] * b[j] + b[i] * a[j]);
                }
                drift.d2_pop(i, t, xk[i], xk, &mut hess);
                src += hess.quad_form(a, b);
            }
            z[(k + 1) * n + i] = z[k * n + i] + (jz[i] + src) * dt;
        }
        check_row(&z[(k + 1) * n..(k + 2) * n], "second-order sensitivity", path, k + 1)?;
    }
    Ok(z)
}

/// Drift and volatility of the LQ game sampled at the left endpoint of every step.
#[derive(Clone, Debug)]
pub struct LqTables<S> {
    pub n: usize,
    pub x0: Vec<S>,
    pub a: Vec<Vec<S>>,
    pub sigma: Vec<Vec<S>>,
}

impl<S: Scalar> LqTables<S> {
    pub fn new(spec: &LqGameSpec<S>, grid: &TimeGrid<S>) -> Self {
        let n = spec.n_players;
        let at = |t: S| (0..n).map(|i| spec.a(i, t)).collect::<Vec<_>>();
        let st = |t: S| (0..n).map(|i| spec.sigma(i, t)).collect::<Vec<_>>();
        Self {
            n,
            x0: spec.x0.clone(),
            a: grid.t[..grid.n_steps].iter().map(|&t| at(t)).collect(),
            sigma: grid.t[..grid.n_steps].iter().map(|&t| st(t)).collect(),
        }
    }
}

/// Lifted pair `𝕏 = (X^{ru}, Y)`: `d𝕏 = (A𝕏 + vcat(rI, I)u)dt + vcat(σ, 0)dW`, `𝕏_0 = (x, 0)`.
pub fn euler_lifted<S: Scalar>(tab: &LqTables<S>, grid: &TimeGrid<S>, u: &[S], dw: &[S], r: S, path: usize) -> Result<Vec<S>> {
    let n = tab.n;
    let d2 = 2 * n;
    let steps = grid.n_steps;
    let mut x = vec![S::zero(); (steps + 1) * d2];
    x[..n].copy_from_slice(&tab.x0);
    for k in 0..steps {
        let dt = grid.dt(k);
        let a = &tab.a[k];
        let s = &tab.sigma[k];
        let (head, tail) = x.split_at_mut((k + 1) * d2);
        let cur = &head[k * d2..];
        let next = &mut tail[..d2];
        for i in 0..n {
            let ui = u[k * n + i];
            next[i] = cur[i] + (a[i] * cur[i] + r * ui) * dt + s[i] * dw[k * n + i];
            next[n + i] = cur[n + i] + (a[i] * cur[n + i] + ui) * dt;
        }
        check_row(next, "lifted state", path, k + 1)?;
    }
    Ok(x)
}
