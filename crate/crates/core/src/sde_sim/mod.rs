//! Euler–Maruyama simulation of states, lifted states, first- and second-order
//! sensitivities and the sufficient-statistic process `F` of the feedback law.

pub mod kernels;
mod noise;
mod strategy;

use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

pub use noise::{gauss_legendre_unit, NoiseBatch, RMode, RValues};
pub use strategy::{Direction, FeedbackLaw, Realized, StrategyProfile};

use crate::error::{Error, Result};
use crate::game_model::{DifferentialGame, LqGameSpec};
use crate::io::{write_column_store, write_csv, ColumnStore};
use crate::ode_solvers::{RiccatiSolution, TimeGrid};
use crate::scalar::Scalar;
use kernels::{euler_lifted, euler_second_sensitivity, euler_sensitivity, euler_state, LqTables};

/// Trajectories of one simulation, each stored per path as `[knot][dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle<S> {
    pub n_players: usize,
    pub grid: TimeGrid<S>,
    pub seed: u64,
    /// State (N per knot) or lifted state (2N per knot).
    pub x: Vec<Vec<S>>,
    pub x_dim: usize,
    pub y: Option<Vec<Vec<S>>>,
    pub z: Option<Vec<Vec<S>>>,
    /// `F` (4N per knot) when a feedback rule was simulated.
    pub f_state: Option<Vec<Vec<S>>>,
    /// Realized controls, `[step][N]`.
    pub u: Vec<Vec<S>>,
}

pub(crate) fn check_grids<S: Scalar>(profile: &TimeGrid<S>, noise: &TimeGrid<S>) -> Result<()> {
    if profile != noise {
        return Err(Error::GridMismatch(format!(
            "profile grid has {} steps on [0,{}], noise grid has {} on [0,{}]",
            profile.n_steps,
            profile.horizon(),
            noise.n_steps,
            noise.horizon()
        )));
    }
    Ok(())
}

pub(crate) fn check_noise_dims<S: Scalar>(noise: &NoiseBatch<S>, n: usize) -> Result<()> {
    if noise.n_dims != n {
        return Err(Error::Dimension(format!("noise has {} Brownian dimensions, game has N = {n}", noise.n_dims)));
    }
    Ok(())
}

pub fn simulate_state<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<PathBundle<S>> {
    let n = game.n_players();
    check_grids(profile.grid(), &noise.grid)?;
    check_noise_dims(noise, n)?;
    if profile.n_players() != n {
        return Err(Error::Dimension(format!("profile has {} players, game has {n}", profile.n_players())));
    }
    let runs: Vec<(Vec<S>, Realized<S>)> = (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let r = profile.realize(&dw);
            let x = euler_state(game, &noise.grid, &r.u, &dw, p)?;
            Ok((x, r))
        })
        .collect::<Result<_>>()?;
    let has_f = runs.first().is_some_and(|(_, r)| r.f.is_some());
    let mut x = Vec::with_capacity(runs.len());
    let mut u = Vec::with_capacity(runs.len());
    let mut f = Vec::new();
    for (xp, r) in runs {
        x.push(xp);
        u.push(r.u);
        if let Some(fp) = r.f {
            f.push(fp);
        }
    }
    Ok(PathBundle {
        n_players: n,
        grid: noise.grid.clone(),
        seed: noise.seed,
        x,
        x_dim: n,
        y: None,
        z: None,
        f_state: has_f.then_some(f),
        u,
    })
}

/// Sensitivity to player `h`'s control in the deterministic `direction`, along the
/// state paths of `state`.
pub fn simulate_sensitivity_y<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    state: &PathBundle<S>,
    h: usize,
    direction: &[S],
) -> Result<PathBundle<S>> {
    check_state_bundle(game, state, h)?;
    check_direction(direction, &state.grid)?;
    let y = state
        .x
        .par_iter()
        .enumerate()
        .map(|(p, x)| euler_sensitivity(game, &state.grid, x, h, direction, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathBundle { y: Some(y), ..state.clone() })
}

/// Second-order sensitivity for distinct players `h ≠ ℓ`.
pub fn simulate_sensitivity_z<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    state: &PathBundle<S>,
    h: usize,
    l: usize,
    dir_h: &[S],
    dir_l: &[S],
) -> Result<PathBundle<S>> {
    if h == l {
        return Err(Error::InvalidArgument(format!("second-order sensitivity needs distinct players, got {h} twice")));
    }
    check_state_bundle(game, state, h.max(l))?;
    check_direction(dir_h, &state.grid)?;
    check_direction(dir_l, &state.grid)?;
    let out = state
        .x
        .par_iter()
        .enumerate()
        .map(|(p, x)| {
            let yh = euler_sensitivity(game, &state.grid, x, h, dir_h, p)?;
            let yl = euler_sensitivity(game, &state.grid, x, l, dir_l, p)?;
            let z = euler_second_sensitivity(game, &state.grid, x, &yh, &yl, p)?;
            Ok((yh, z))
        })
        .collect::<Result<Vec<_>>>()?;
    let (y, z) = out.into_iter().unzip();
    Ok(PathBundle { y: Some(y), z: Some(z), ..state.clone() })
}

fn check_state_bundle<S: Scalar>(game: &dyn DifferentialGame<S>, state: &PathBundle<S>, player: usize) -> Result<()> {
    if state.x_dim != game.n_players() {
        return Err(Error::Dimension("sensitivities need a plain state bundle".into()));
    }
    if player >= game.n_players() {
        return Err(Error::InvalidArgument(format!("player {player} out of range")));
    }
    Ok(())
}

fn check_direction<S: Scalar>(dir: &[S], grid: &TimeGrid<S>) -> Result<()> {
    if dir.len() != grid.n_steps {
        return Err(Error::GridMismatch(format!("direction has {} steps, grid has {}", dir.len(), grid.n_steps)));
    }
    Ok(())
}

/// Lifted state with each path's sampled `r`.
pub fn simulate_lifted<S: Scalar>(
    spec: &LqGameSpec<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
) -> Result<PathBundle<S>> {
    if noise.quadrature().is_some() {
        return Err(Error::InvalidArgument("lifted simulation needs sampled r; use simulate_lifted_at for fixed nodes".into()));
    }
    lifted_impl(spec, profile, noise, |p| noise.sampled_r(p).expect("sampled"))
}

/// Lifted state with the same `r` on every path.
pub fn simulate_lifted_at<S: Scalar>(
    spec: &LqGameSpec<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    r: S,
) -> Result<PathBundle<S>> {
    lifted_impl(spec, profile, noise, |_| r)
}

fn lifted_impl<S: Scalar>(
    spec: &LqGameSpec<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    r_of: impl Fn(usize) -> S + Sync,
) -> Result<PathBundle<S>> {
    let n = spec.n_players;
    check_grids(profile.grid(), &noise.grid)?;
    check_noise_dims(noise, n)?;
    let tab = LqTables::new(spec, &noise.grid);
    let runs = (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let dw = noise.dw(p);
            let real = profile.realize(&dw);
            let x = euler_lifted(&tab, &noise.grid, &real.u, &dw, r_of(p), p)?;
            Ok((x, real.u))
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, u) = runs.into_iter().unzip();
    Ok(PathBundle { n_players: n, grid: noise.grid.clone(), seed: noise.seed, x, x_dim: 2 * n, y: None, z: None, f_state: None, u })
}

/// `F` under the feedback law of `riccati`, the realized `u*`, and the state it drives.
pub fn simulate_f_process<S: Scalar>(
    spec: &LqGameSpec<S>,
    riccati: &RiccatiSolution<S>,
    noise: &NoiseBatch<S>,
) -> Result<PathBundle<S>> {
    let law = FeedbackLaw::new(spec, riccati, &noise.grid)?;
    simulate_state(spec, &StrategyProfile::feedback(law), noise)
}

/// `E|v_{k,d}|^p` for every knot `k` and coordinate `d`, over paths produced by `path_fn`.
/// Paths are reduced in fixed chunks so the result does not depend on scheduling.
pub fn path_moments<S: Scalar>(
    n_paths: usize,
    width: usize,
    p: f64,
    path_fn: impl Fn(usize) -> Result<Vec<S>> + Sync,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 64;
    let n_chunks = n_paths.div_ceil(CHUNK);
    let partial = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc: Vec<f64> = Vec::new();
            for path in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let v = path_fn(path)?;
                if acc.is_empty() {
                    acc = vec![0.0; v.len()];
                }
                for (a, x) in acc.iter_mut().zip(&v) {
                    *a += x.as_f64().abs().powf(p);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = partial.first().map_or(0, Vec::len);
    if len % width.max(1) != 0 {
        return Err(Error::Dimension(format!("path of length {len} is not a multiple of width {width}")));
    }
    let mut total = vec![0.0; len];
    for part in partial {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|v| v / n_paths as f64).collect())
}

/// Largest value over knots of each coordinate of a `[knot][width]` moment table.
pub fn sup_over_knots(moments: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; width];
    for row in moments.chunks(width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o = o.max(*v);
        }
    }
    out
}

/// `sup_t E|X_{t,i}|^p` per player, without keeping the paths.
pub fn state_moment_sup<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    p: f64,
) -> Result<Vec<f64>> {
    let n = game.n_players();
    check_grids(profile.grid(), &noise.grid)?;
    check_noise_dims(noise, n)?;
    let m = path_moments(noise.n_paths, n, p, |path| {
        let dw = noise.dw(path);
        let real = profile.realize(&dw);
        euler_state(game, &noise.grid, &real.u, &dw, path)
    })?;
    Ok(sup_over_knots(&m, n))
}

/// `sup_t E|Y_{t,i}|^p` per coordinate for player `h`'s sensitivity in `direction`.
pub fn sensitivity_moment_sup<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    h: usize,
    direction: &[S],
    p: f64,
) -> Result<Vec<f64>> {
    let n = game.n_players();
    check_grids(profile.grid(), &noise.grid)?;
    check_noise_dims(noise, n)?;
    check_direction(direction, &noise.grid)?;
    let m = path_moments(noise.n_paths, n, p, |path| {
        let dw = noise.dw(path);
        let real = profile.realize(&dw);
        let x = euler_state(game, &noise.grid, &real.u, &dw, path)?;
        euler_sensitivity(game, &noise.grid, &x, h, direction, path)
    })?;
    Ok(sup_over_knots(&m, n))
}

/// `sup_t E|Z_{t,i}|^p` per coordinate for the pair `(h, ℓ)`.
pub fn second_sensitivity_moment_sup<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    profile: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    (h, l): (usize, usize),
    (dir_h, dir_l): (&[S], &[S]),
    p: f64,
) -> Result<Vec<f64>> {
    let n = game.n_players();
    check_grids(profile.grid(), &noise.grid)?;
    check_noise_dims(noise, n)?;
    let m = path_moments(noise.n_paths, n, p, |path| {
        let dw = noise.dw(path);
        let real = profile.realize(&dw);
        let x = euler_state(game, &noise.grid, &real.u, &dw, path)?;
        let yh = euler_sensitivity(game, &noise.grid, &x, h, dir_h, path)?;
        let yl = euler_sensitivity(game, &noise.grid, &x, l, dir_l, path)?;
        euler_second_sensitivity(game, &noise.grid, &x, &yh, &yl, path)
    })?;
    Ok(sup_over_knots(&m, n))
}

impl<S: Scalar> PathBundle<S> {
    pub fn n_paths(&self) -> usize {
        self.x.len()
    }

    /// Value of coordinate `d` of path `p` at knot `k`.
    pub fn x_at(&self, p: usize, k: usize, d: usize) -> S {
        self.x[p][k * self.x_dim + d]
    }

    /// Column store with the first `max_paths` paths; each column is one trajectory.
    pub fn to_column_store(&self, max_paths: usize, header: serde_json::Value) -> ColumnStore {
        let keep = self.n_paths().min(max_paths);
        let mut columns = vec![("t".to_string(), self.grid.to_f64())];
        let mut push = |name: &str, series: &[Vec<S>], width: usize| {
            for (p, path) in series.iter().take(keep).enumerate() {
                for d in 0..width {
                    columns.push((format!("{name}[{p}][{d}]"), path.iter().skip(d).step_by(width).map(|v| v.as_f64()).collect()));
                }
            }
        };
        push("x", &self.x, self.x_dim);
        if let Some(y) = &self.y {
            push("y", y, self.n_players);
        }
        if let Some(z) = &self.z {
            push("z", z, self.n_players);
        }
        if let Some(f) = &self.f_state {
            push("f", f, 4 * self.n_players);
        }
        push("u", &self.u, self.n_players);
        let mut header = header;
        if let Some(obj) = header.as_object_mut() {
            obj.insert("seed".into(), self.seed.into());
            obj.insert("n_steps".into(), self.grid.n_steps.into());
            obj.insert("horizon".into(), self.grid.horizon().as_f64().into());
            obj.insert("paths_exported".into(), keep.into());
            obj.insert("paths_total".into(), self.n_paths().into());
        }
        ColumnStore { header, columns }
    }

    pub fn write_store(&self, path: &Path, max_paths: usize, header: serde_json::Value) -> Result<()> {
        write_column_store(path, &self.to_column_store(max_paths, header))
    }

    /// Long-format CSV `path, t, x_1, …` (plus `y_*`, `z_*` when present) for the first `max_paths` paths.
    pub fn write_csv(&self, file: &Path, max_paths: usize) -> Result<()> {
        let n = self.n_players;
        let mut headers = vec!["path".to_string(), "t".to_string()];
        headers.extend((1..=self.x_dim).map(|d| format!("x_{d}")));
        if self.y.is_some() {
            headers.extend((1..=n).map(|d| format!("y_{d}")));
        }
        if self.z.is_some() {
            headers.extend((1..=n).map(|d| format!("z_{d}")));
        }
        let keep = self.n_paths().min(max_paths);
        let mut rows = Vec::new();
        for p in 0..keep {
            for k in 0..self.grid.n_knots() {
                let mut row = vec![p as f64, self.grid.t[k].as_f64()];
                row.extend(self.x[p][k * self.x_dim..(k + 1) * self.x_dim].iter().map(|v| v.as_f64()));
                for extra in [&self.y, &self.z].into_iter().flatten() {
                    row.extend(extra[p][k * n..(k + 1) * n].iter().map(|v| v.as_f64()));
                }
                rows.push(row);
            }
        }
        write_csv(file, &headers, rows)
    }

    /// Export header fragment describing the run.
    pub fn describe(&self) -> serde_json::Value {
        json!({ "seed": self.seed, "n_steps": self.grid.n_steps, "n_paths": self.n_paths(), "n_players": self.n_players })
    }
}
