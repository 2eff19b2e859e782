//! Backward RK4 integration on time grids and the Riccati system of the LQ graph game.

mod riccati;

pub use riccati::{
    assemble_gain, solve_m0, solve_m1, solve_m2, solve_m3, solve_riccati, ResidualReport, RiccatiSolution,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Entries above this magnitude are treated as a finite-time blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Default uniform step count `max(200, ceil(400 T))`.
pub fn default_steps(horizon: f64) -> usize {
    200usize.max((400.0 * horizon).ceil() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TimeGrid<S> {
    pub n_steps: usize,
    pub t: Vec<S>,
    pub uniform: bool,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn uniform(horizon: S, n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidArgument(format!("time grid needs at least 2 steps, got {n_steps}")));
        }
        if !(horizon > S::zero()) {
            return Err(Error::InvalidArgument(format!("time grid horizon {horizon} must be positive")));
        }
        let mut t: Vec<S> = (0..=n_steps).map(|k| horizon * S::of_usize(k) / S::of_usize(n_steps)).collect();
        t[n_steps] = horizon;
        Ok(Self { n_steps, t, uniform: true })
    }

    pub fn with_default_steps(horizon: S) -> Result<Self> {
        Self::uniform(horizon, default_steps(horizon.as_f64()))
    }

    pub fn from_knots(t: Vec<S>) -> Result<Self> {
        if t.len() < 3 {
            return Err(Error::InvalidArgument("time grid needs at least 3 knots".into()));
        }
        if t[0] != S::zero() {
            return Err(Error::InvalidArgument("time grid must start at 0".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("time grid knots must be strictly increasing".into()));
        }
        let n_steps = t.len() - 1;
        let h0 = t[1] - t[0];
        let tol = S::of(1e-9) * t[n_steps];
        let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= tol);
        Ok(Self { n_steps, t, uniform })
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.t[self.n_steps]
    }

    #[inline]
    pub fn dt(&self, k: usize) -> S {
        self.t[k + 1] - self.t[k]
    }

    pub fn n_knots(&self) -> usize {
        self.t.len()
    }

    /// Uniform grid with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if !self.uniform {
            return Err(Error::GridMismatch("only uniform grids can be refined".into()));
        }
        Self::uniform(self.horizon(), self.n_steps * factor)
    }

    /// `Some(r)` when every knot of `coarse` is knot `r·k` of `self`.
    pub fn refinement_factor(&self, coarse: &TimeGrid<S>) -> Option<usize> {
        if coarse.n_steps == 0 || !self.n_steps.is_multiple_of(coarse.n_steps) {
            return None;
        }
        let r = self.n_steps / coarse.n_steps;
        let tol = S::of(1e-9) * self.horizon().max(S::one());
        coarse.t.iter().enumerate().all(|(k, &tc)| (self.t[k * r] - tc).abs() <= tol).then_some(r)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.t.iter().map(|v| v.as_f64()).collect()
    }
}

/// Where an RK4 stage is evaluated: on knot `k` or at the midpoint of `[t_k, t_{k+1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StagePoint {
    Knot(usize),
    Mid(usize),
}

/// Classical RK4 from `T` down to `0`, one step per grid interval.
/// `rhs(t, y, dy)` writes `dy/dt`. Returns the value at every knot in forward order.
pub fn integrate_backward<S: Scalar>(
    mut rhs: impl FnMut(S, &[S], &mut [S]),
    terminal: &[S],
    grid: &TimeGrid<S>,
) -> Result<Vec<Vec<S>>> {
    integrate_backward_staged(|t, _, y, dy| rhs(t, y, dy), terminal, grid, |_| {})
}

/// RK4 backward march that also reports which grid point each stage sits on and
/// applies `project` after every completed step.
pub(crate) fn integrate_backward_staged<S: Scalar>(
    mut rhs: impl FnMut(S, StagePoint, &[S], &mut [S]),
    terminal: &[S],
    grid: &TimeGrid<S>,
    mut project: impl FnMut(&mut [S]),
) -> Result<Vec<Vec<S>>> {
    let dim = terminal.len();
    let n = grid.n_steps;
    let mut out = vec![Vec::new(); n + 1];
    let mut y = terminal.to_vec();
    check_finite(&y, n, grid.t[n])?;
    out[n] = y.clone();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![S::zero(); dim], vec![S::zero(); dim], vec![S::zero(); dim], vec![S::zero(); dim], vec![S::zero(); dim]);
    let two = S::two();
    let six = S::of(6.0);
    for k in (0..n).rev() {
        let t1 = grid.t[k + 1];
        let t0 = grid.t[k];
        let h = t0 - t1;
        let tm = t1 + h * S::half();
        rhs(t1, StagePoint::Knot(k + 1), &y, &mut k1);
        axpy(&mut tmp, &y, h * S::half(), &k1);
        rhs(tm, StagePoint::Mid(k), &tmp, &mut k2);
        axpy(&mut tmp, &y, h * S::half(), &k2);
        rhs(tm, StagePoint::Mid(k), &tmp, &mut k3);
        axpy(&mut tmp, &y, h, &k3);
        rhs(t0, StagePoint::Knot(k), &tmp, &mut k4);
        for d in 0..dim {
            y[d] += h / six * (k1[d] + two * k2[d] + two * k3[d] + k4[d]);
        }
        project(&mut y);
        check_finite(&y, k, t0)?;
        out[k] = y.clone();
    }
    Ok(out)
}

#[inline]
fn axpy<S: Scalar>(out: &mut [S], y: &[S], a: S, x: &[S]) {
    for ((o, &yi), &xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + a * xi;
    }
}

fn check_finite<S: Scalar>(y: &[S], knot: usize, t: S) -> Result<()> {
    let limit = S::of(BLOW_UP_THRESHOLD);
    if y.iter().any(|v| !v.is_finite() || v.abs() > limit) {
        return Err(Error::BlowUp { knot, time: t.as_f64() });
    }
    Ok(())
}

/// Cubic Hermite value at the midpoint of an interval of length `h`.
#[inline]
pub(crate) fn hermite_mid<S: Scalar>(y0: S, d0: S, y1: S, d1: S, h: S) -> S {
    (y0 + y1) * S::half() + h / S::of(8.0) * (d0 - d1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_keeps_terminal() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let out = integrate_backward(|_, _, dy: &mut [f64]| dy.fill(0.0), &[1.5, -2.0], &g).unwrap();
        assert!(out.iter().all(|v| v == &vec![1.5, -2.0]));
    }

    #[test]
    fn exponential_decay_backward() {
        let g = TimeGrid::uniform(1.0, 100).unwrap();
        let out = integrate_backward(|_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &[1.0], &g).unwrap();
        assert!((out[0][0] - std::f64::consts::E).abs() < 1e-7);
    }

    #[test]
    fn quadratic_blow_up_detected() {
        // y(t) = 2 / (1 + 2(t − T)) solves ẏ = −y² with y(T) = 2 and is singular at t = T − 1/2.
        let g = TimeGrid::uniform(1.0, 100).unwrap();
        let err = integrate_backward(|_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] * y[0], &[2.0], &g).unwrap_err();
        match err {
            Error::BlowUp { time, .. } => assert!(time > 0.4 && time < 0.5, "blow-up reported at {time}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn refinement_factor_detection() {
        let a = TimeGrid::uniform(1.0, 10).unwrap();
        let b = TimeGrid::uniform(1.0, 40).unwrap();
        assert_eq!(b.refinement_factor(&a), Some(4));
        assert_eq!(a.refinement_factor(&b), None);
        assert_eq!(default_steps(0.1), 200);
        assert_eq!(default_steps(2.0), 800);
    }

    #[test]
    fn hermite_midpoint_exact_for_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let v = hermite_mid(f(0.2), df(0.2), f(0.7), df(0.7), 0.5);
        assert!((v - f(0.45)).abs() < 1e-14);
    }
}
