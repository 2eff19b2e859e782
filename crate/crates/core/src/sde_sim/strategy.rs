use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game_model::{build_lifted_matrices, LqGameSpec};
use crate::linalg::Mat;
use crate::ode_solvers::{RiccatiSolution, TimeGrid};
use crate::scalar::Scalar;

/// Feedback `u* = −K F − ĨM2` sampled on a simulation grid, together with the
/// coefficients of the linear SDE driving `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackLaw<S> {
    pub n: usize,
    pub grid: TimeGrid<S>,
    /// `K(t_k)`, N×4N, one per simulation knot.
    pub gain: Vec<Mat<S>>,
    /// `Ĩ M2(t_k)`.
    pub offset: Vec<Vec<S>>,
    a: Vec<Vec<S>>,
    sigma: Vec<Vec<S>>,
    pub f0: Vec<S>,
}

impl<S: Scalar> FeedbackLaw<S> {
    /// Samples `riccati` on `grid`, which must be its grid or coarsen it by an integer factor.
    pub fn new(spec: &LqGameSpec<S>, riccati: &RiccatiSolution<S>, grid: &TimeGrid<S>) -> Result<Self> {
        if riccati.n_players != spec.n_players {
            return Err(Error::Dimension(format!(
                "Riccati solution has N = {}, spec has N = {}",
                riccati.n_players, spec.n_players
            )));
        }
        let stride = riccati.stride_for(grid)?;
        let lifted = build_lifted_matrices(spec);
        let n = spec.n_players;
        let mut f0 = lifted.initial_state(&spec.x0);
        f0.extend(lifted.initial_state(&spec.x0).into_iter().map(|v| v * S::half()));
        Ok(Self {
            n,
            grid: grid.clone(),
            gain: (0..grid.n_knots()).map(|k| riccati.k_gain[k * stride].clone()).collect(),
            offset: (0..grid.n_knots()).map(|k| riccati.offset(k * stride)).collect(),
            a: grid.t.iter().map(|&t| lifted.a_diag(t)).collect(),
            sigma: grid.t.iter().map(|&t| lifted.sigma_diag(t)).collect(),
            f0,
        })
    }

    /// Euler–Maruyama for `dF = [diag(A,A)F + Ĩᵀu]dt + vcat(Σ, ½Σ)dW`, `u = −KF − ĨM2`.
    /// Returns `F` on every knot (`[knot][4N]`) and `u` on every step (`[step][N]`).
    pub fn simulate(&self, dw: &[S]) -> (Vec<S>, Vec<S>) {
        let n = self.n;
        let d4 = 4 * n;
        let steps = self.grid.n_steps;
        let mut f = vec![S::zero(); (steps + 1) * d4];
        let mut u = vec![S::zero(); steps * n];
        f[..d4].copy_from_slice(&self.f0);
        let third = S::one() / S::of(3.0);
        let half = S::half();
        for k in 0..steps {
            let dt = self.grid.dt(k);
            let (head, tail) = f.split_at_mut((k + 1) * d4);
            let cur = &head[k * d4..];
            let next = &mut tail[..d4];
            let uk = &mut u[k * n..(k + 1) * n];
            let kf = self.gain[k].mul_vec(cur);
            for i in 0..n {
                uk[i] = -kf[i] - self.offset[k][i];
            }
            let a = &self.a[k];
            for (c, slot) in next.iter_mut().enumerate() {
                let block = c / n;
                let i = c % n;
                let push = match block {
                    0 => half * uk[i],
                    1 => uk[i],
                    2 => third * uk[i],
                    _ => half * uk[i],
                };
                *slot = cur[c] + (a[i] * cur[c] + push) * dt;
            }
            let noise = &dw[k * n..(k + 1) * n];
            for i in 0..n {
                let s = self.sigma[k][i] * noise[i];
                next[i] += s;
                next[2 * n + i] += half * s;
            }
        }
        (f, u)
    }
}

/// Perturbation direction for one player's control.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Scalar", rename_all = "snake_case")]
pub enum Direction<S> {
    /// Deterministic path, one value per step.
    Path(Vec<S>),
    /// The player's own base control, so `u_i → (1 + ε) u_i`.
    OwnControl,
    /// `δ_k · F_k` for a per-step 4N row `δ_k`; needs a feedback base.
    GainTilt(Vec<Vec<S>>),
}

/// Causal open-loop control rule for all players on a grid.
#[derive(Clone, Debug)]
pub enum StrategyProfile<S: Scalar> {
    /// `paths[i][k]` is player `i`'s control on step `k`.
    Deterministic { grid: TimeGrid<S>, paths: Vec<Vec<S>> },
    FeedbackOnF(Arc<FeedbackLaw<S>>),
    /// Base rule with player `player`'s coordinate shifted by `eps · direction`.
    Perturbed { base: Box<StrategyProfile<S>>, player: usize, direction: Direction<S>, eps: S },
}

/// Controls realized on one noise path: `u` is `[step][N]`, `f` is the `F` path when a
/// feedback rule is involved.
#[derive(Clone, Debug, PartialEq)]
pub struct Realized<S> {
    pub u: Vec<S>,
    pub f: Option<Vec<S>>,
}

impl<S: Scalar> StrategyProfile<S> {
    pub fn zero(grid: &TimeGrid<S>, n: usize) -> Self {
        StrategyProfile::Deterministic { grid: grid.clone(), paths: vec![vec![S::zero(); grid.n_steps]; n] }
    }

    /// Deterministic rule `u_i(t_k) = f(i, t_k)`.
    pub fn from_fn(grid: &TimeGrid<S>, n: usize, f: impl Fn(usize, S) -> S) -> Self {
        let paths = (0..n).map(|i| grid.t[..grid.n_steps].iter().map(|&t| f(i, t)).collect()).collect();
        StrategyProfile::Deterministic { grid: grid.clone(), paths }
    }

    pub fn feedback(law: FeedbackLaw<S>) -> Self {
        StrategyProfile::FeedbackOnF(Arc::new(law))
    }

    pub fn perturbed(&self, player: usize, direction: Direction<S>, eps: S) -> Result<Self> {
        if player >= self.n_players() {
            return Err(Error::InvalidArgument(format!("player {player} out of range for N = {}", self.n_players())));
        }
        let steps = self.grid().n_steps;
        match &direction {
            Direction::Path(p) if p.len() != steps => {
                return Err(Error::GridMismatch(format!("direction has {} steps, profile has {steps}", p.len())))
            }
            Direction::GainTilt(rows) => {
                if self.feedback_law().is_none() {
                    return Err(Error::InvalidArgument("gain tilt needs a feedback base profile".into()));
                }
                if rows.len() != steps || rows.iter().any(|r| r.len() != 4 * self.n_players()) {
                    return Err(Error::Dimension("gain tilt needs one 4N row per step".into()));
                }
            }
            _ => {}
        }
        Ok(StrategyProfile::Perturbed { base: Box::new(self.clone()), player, direction, eps })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        match self {
            StrategyProfile::Deterministic { grid, .. } => grid,
            StrategyProfile::FeedbackOnF(law) => &law.grid,
            StrategyProfile::Perturbed { base, .. } => base.grid(),
        }
    }

    pub fn n_players(&self) -> usize {
        match self {
            StrategyProfile::Deterministic { paths, .. } => paths.len(),
            StrategyProfile::FeedbackOnF(law) => law.n,
            StrategyProfile::Perturbed { base, .. } => base.n_players(),
        }
    }

    pub fn feedback_law(&self) -> Option<&Arc<FeedbackLaw<S>>> {
        match self {
            StrategyProfile::FeedbackOnF(law) => Some(law),
            StrategyProfile::Perturbed { base, .. } => base.feedback_law(),
            StrategyProfile::Deterministic { .. } => None,
        }
    }

    /// True when the realized controls do not depend on the noise.
    pub fn is_deterministic(&self) -> bool {
        self.feedback_law().is_none()
    }

    /// Realizes every player's control on the noise path with increments `dw`.
    pub fn realize(&self, dw: &[S]) -> Realized<S> {
        match self {
            StrategyProfile::Deterministic { grid, paths } => {
                let n = paths.len();
                let mut u = vec![S::zero(); grid.n_steps * n];
                for (i, p) in paths.iter().enumerate() {
                    for (k, v) in p.iter().enumerate() {
                        u[k * n + i] = *v;
                    }
                }
                Realized { u, f: None }
            }
            StrategyProfile::FeedbackOnF(law) => {
                let (f, u) = law.simulate(dw);
                Realized { u, f: Some(f) }
            }
            StrategyProfile::Perturbed { base, player, direction, eps } => {
                let mut r = base.realize(dw);
                let n = self.n_players();
                let steps = self.grid().n_steps;
                for k in 0..steps {
                    let idx = k * n + player;
                    let dir = match direction {
                        Direction::Path(p) => p[k],
                        Direction::OwnControl => r.u[idx],
                        Direction::GainTilt(rows) => {
                            let f = r.f.as_ref().expect("validated feedback base");
                            crate::linalg::dot(&rows[k], &f[k * 4 * n..(k + 1) * 4 * n])
                        }
                    };
                    r.u[idx] += *eps * dir;
                }
                r
            }
        }
    }
}
