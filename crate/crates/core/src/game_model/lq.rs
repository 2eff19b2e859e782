use serde::{Deserialize, Serialize};

use super::coefficient::Coefficient;
use super::traits::{CostModel, DifferentialGame, DriftModel};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Linear-quadratic game on a weighted directed graph.
///
/// Player `i` minimizes
/// `E[∫ (u_i² + (1/N) Σ_j q_ij (X_i − X_j)²) dt + γ_i (X_i(T) − d_i)²]`
/// subject to `dX_i = (a_i(t) X_i + u_i) dt + σ_i(t) dW^i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LqGameSpec<S> {
    pub n_players: usize,
    pub horizon: S,
    /// Interaction weights; the diagonal is stored as zero and never read.
    pub q: Mat<S>,
    pub gamma: Vec<S>,
    pub d: Vec<S>,
    pub a_fn: Vec<Coefficient>,
    pub sigma_fn: Vec<Coefficient>,
    pub x0: Vec<S>,
    pub control_bound: S,
}

impl<S: Scalar> LqGameSpec<S> {
    /// Validating constructor. Zeroes the diagonal of `q`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: S,
        mut q: Mat<S>,
        gamma: Vec<S>,
        d: Vec<S>,
        a_fn: Vec<Coefficient>,
        sigma_fn: Vec<Coefficient>,
        x0: Vec<S>,
        control_bound: S,
    ) -> Result<Self> {
        let n = q.rows();
        for i in 0..n.min(q.cols()) {
            q[(i, i)] = S::zero();
        }
        let spec = Self { n_players: n, horizon, q, gamma, d, a_fn, sigma_fn, x0, control_bound };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor with constant drift rate and volatility for every player.
    pub fn with_constants(horizon: S, q: Mat<S>, gamma: Vec<S>, d: Vec<S>, a: f64, sigma: f64, x0: Vec<S>) -> Result<Self> {
        let n = q.rows();
        Self::new(
            horizon,
            q,
            gamma,
            d,
            vec![Coefficient::constant(a); n],
            vec![Coefficient::constant(sigma); n],
            x0,
            S::of(1e6),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_players;
        if n == 0 {
            return Err(Error::Invariant("game.n_players must be positive".into()));
        }
        if self.q.rows() != n || self.q.cols() != n {
            return Err(Error::Invariant(format!(
                "game.weights: expected {n}x{n} matrix, got {}x{}",
                self.q.rows(),
                self.q.cols()
            )));
        }
        let check_len = |name: &str, len: usize| {
            if len != n {
                Err(Error::Invariant(format!("game.{name}: expected length {n}, got {len}")))
            } else {
                Ok(())
            }
        };
        check_len("gamma", self.gamma.len())?;
        check_len("d", self.d.len())?;
        check_len("x0", self.x0.len())?;
        check_len("drift", self.a_fn.len())?;
        check_len("vol", self.sigma_fn.len())?;
        if !(self.horizon > S::zero()) || !self.horizon.is_finite() {
            return Err(Error::Invariant(format!("horizon T = {} must be positive", self.horizon)));
        }
        if !(self.control_bound > S::zero()) {
            return Err(Error::Invariant(format!("control_bound L = {} must be positive", self.control_bound)));
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.q[(i, j)];
                if i != j && (v < S::zero() || !v.is_finite()) {
                    return Err(Error::Invariant(format!("weights[{i}][{j}] < 0")));
                }
            }
            if self.gamma[i] < S::zero() || !self.gamma[i].is_finite() {
                return Err(Error::Invariant(format!("gamma[{i}] < 0")));
            }
            if !self.d[i].is_finite() {
                return Err(Error::Invariant(format!("d[{i}] is not finite")));
            }
            if !self.x0[i].is_finite() {
                return Err(Error::Invariant(format!("x0[{i}] is not finite")));
            }
        }
        let t = self.horizon.as_f64();
        for (i, c) in self.a_fn.iter().enumerate() {
            c.validate(&format!("game.drift[{i}]"), t)?;
        }
        for (i, c) in self.sigma_fn.iter().enumerate() {
            c.validate(&format!("game.vol[{i}]"), t)?;
        }
        Ok(())
    }

    #[inline]
    pub fn a(&self, i: usize, t: S) -> S {
        self.a_fn[i].eval(t)
    }

    #[inline]
    pub fn sigma(&self, i: usize, t: S) -> S {
        self.sigma_fn[i].eval(t)
    }

    /// Same game with every volatility set to zero (deterministic dynamics).
    pub fn deterministic(&self) -> Self {
        Self { sigma_fn: vec![Coefficient::constant(0.0); self.n_players], ..self.clone() }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma_fn: vec![Coefficient::constant(sigma); self.n_players], ..self.clone() }
    }

    pub fn cast<T: Scalar>(&self) -> LqGameSpec<T> {
        let c = |v: &Vec<S>| v.iter().map(|x| T::of(x.as_f64())).collect();
        LqGameSpec {
            n_players: self.n_players,
            horizon: T::of(self.horizon.as_f64()),
            q: self.q.cast(),
            gamma: c(&self.gamma),
            d: c(&self.d),
            a_fn: self.a_fn.clone(),
            sigma_fn: self.sigma_fn.clone(),
            x0: c(&self.x0),
            control_bound: T::of(self.control_bound.as_f64()),
        }
    }

    fn inv_n(&self) -> S {
        S::one() / S::of_usize(self.n_players)
    }
}

impl<S: Scalar> DriftModel<S> for LqGameSpec<S> {
    fn value(&self, i: usize, t: S, own: S, _pop: &[S]) -> S {
        self.a(i, t) * own
    }
    fn d_own(&self, i: usize, t: S, _own: S, _pop: &[S]) -> S {
        self.a(i, t)
    }
    fn d_pop(&self, _i: usize, _t: S, _own: S, _pop: &[S], out: &mut [S]) {
        out.fill(S::zero());
    }
    fn d2_own(&self, _i: usize, _t: S, _own: S, _pop: &[S]) -> S {
        S::zero()
    }
    fn d2_own_pop(&self, _i: usize, _t: S, _own: S, _pop: &[S], out: &mut [S]) {
        out.fill(S::zero());
    }
    fn d2_pop(&self, _i: usize, _t: S, _own: S, _pop: &[S], out: &mut Mat<S>) {
        out.as_mut_slice().fill(S::zero());
    }
    fn is_decoupled(&self) -> bool {
        true
    }
}

impl<S: Scalar> CostModel<S> for LqGameSpec<S> {
    fn running(&self, i: usize, _t: S, x: &[S], u: &[S]) -> S {
        let row = self.q.row(i);
        let mut inter = S::zero();
        for (j, &q) in row.iter().enumerate() {
            if j != i && q != S::zero() {
                let diff = x[i] - x[j];
                inter += q * diff * diff;
            }
        }
        u[i] * u[i] + inter * self.inv_n()
    }

    fn running_grad(&self, i: usize, _t: S, x: &[S], u: &[S], gx: &mut [S], gu: &mut [S]) {
        gx.fill(S::zero());
        gu.fill(S::zero());
        let scale = S::two() * self.inv_n();
        let mut own = S::zero();
        for (j, &q) in self.q.row(i).iter().enumerate() {
            if j != i && q != S::zero() {
                let diff = x[i] - x[j];
                own += q * diff;
                gx[j] = -scale * q * diff;
            }
        }
        gx[i] = scale * own;
        gu[i] = S::two() * u[i];
    }

    fn running_hess(&self, i: usize, _t: S, _x: &[S], _u: &[S], hxx: &mut Mat<S>, hxu: &mut Mat<S>, huu: &mut Mat<S>) {
        hxx.as_mut_slice().fill(S::zero());
        hxu.as_mut_slice().fill(S::zero());
        huu.as_mut_slice().fill(S::zero());
        let scale = S::two() * self.inv_n();
        for (j, &q) in self.q.row(i).iter().enumerate() {
            if j != i && q != S::zero() {
                hxx[(i, i)] += scale * q;
                hxx[(j, j)] += scale * q;
                hxx[(i, j)] -= scale * q;
                hxx[(j, i)] -= scale * q;
            }
        }
        huu[(i, i)] = S::two();
    }

    fn terminal(&self, i: usize, x: &[S]) -> S {
        let diff = x[i] - self.d[i];
        self.gamma[i] * diff * diff
    }

    fn terminal_grad(&self, i: usize, x: &[S], g: &mut [S]) {
        g.fill(S::zero());
        g[i] = S::two() * self.gamma[i] * (x[i] - self.d[i]);
    }

    fn terminal_hess(&self, i: usize, _x: &[S], h: &mut Mat<S>) {
        h.as_mut_slice().fill(S::zero());
        h[(i, i)] = S::two() * self.gamma[i];
    }
}

impl<S: Scalar> DifferentialGame<S> for LqGameSpec<S> {
    fn n_players(&self) -> usize {
        self.n_players
    }
    fn horizon(&self) -> S {
        self.horizon
    }
    fn initial_state(&self) -> &[S] {
        &self.x0
    }
    fn volatility(&self, i: usize, t: S) -> S {
        self.sigma(i, t)
    }
    fn drift(&self) -> &dyn DriftModel<S> {
        self
    }
    fn cost(&self) -> &dyn CostModel<S> {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_player() -> LqGameSpec<f64> {
        let q = Mat::from_rows(&[vec![0.0, 4.0], vec![2.0, 0.0]]).unwrap();
        LqGameSpec::with_constants(1.0, q, vec![1.0, 2.0], vec![0.5, -0.5], 0.3, 1.0, vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn negative_gamma_reports_field() {
        let q = Mat::zeros(1, 1);
        let err = LqGameSpec::with_constants(1.0, q, vec![-1.0], vec![0.0], 0.0, 1.0, vec![0.0]).unwrap_err();
        assert_eq!(err.to_string(), "invariant violation: gamma[0] < 0");
    }

    #[test]
    fn nonpositive_horizon_rejected() {
        let err = LqGameSpec::with_constants(0.0, Mat::zeros(1, 1), vec![1.0], vec![0.0], 0.0, 1.0, vec![0.0]);
        assert!(err.is_err());
    }

    #[test]
    fn diagonal_of_weights_is_zeroed() {
        let q = Mat::from_rows(&[vec![7.0, 1.0], vec![1.0, 7.0]]).unwrap();
        let g = LqGameSpec::with_constants(1.0, q, vec![1.0; 2], vec![0.0; 2], 0.0, 1.0, vec![0.0; 2]).unwrap();
        assert_eq!(g.q[(0, 0)], 0.0);
        assert_eq!(g.q[(1, 1)], 0.0);
    }

    #[test]
    fn cost_derivatives_match_central_differences() {
        let g = two_player();
        let x = [0.3, -0.7];
        let u = [0.2, 0.9];
        let h = 1e-6;
        let mut gx = [0.0; 2];
        let mut gu = [0.0; 2];
        for i in 0..2 {
            g.running_grad(i, 0.0, &x, &u, &mut gx, &mut gu);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (g.running(i, 0.0, &xp, &u) - g.running(i, 0.0, &xm, &u)) / (2.0 * h);
                assert!((fd - gx[k]).abs() < 1e-7, "player {i} x{k}: {fd} vs {}", gx[k]);
            }
            let mut hxx = Mat::zeros(2, 2);
            let mut hxu = Mat::zeros(2, 2);
            let mut huu = Mat::zeros(2, 2);
            g.running_hess(i, 0.0, &x, &u, &mut hxx, &mut hxu, &mut huu);
            // cross term ∂²_{x_0 x_1} f_i = -2 q_ij / N
            let j = 1 - i;
            assert_eq!(hxx[(0, 1)], -g.q[(i, j)]);
        }
    }
}
