//! Evaluator interfaces for games with scalar per-player states and additive controls:
//! `dX_i = (b_i(t, X_i, X) + u_i) dt + σ_i(t) dW^i`, running cost `f_i(t, X, u)` and
//! terminal cost `g_i(X)`.

use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Drift `b_i(t, x, y)` where `x` is the player's own state and `y` the full population state.
///
/// Derivatives in `y` treat the own coordinate inside `y` as an independent argument,
/// so the total derivative in `X_i` is `d_own + d_pop[i]`.
pub trait DriftModel<S: Scalar>: Send + Sync {
    fn value(&self, i: usize, t: S, own: S, pop: &[S]) -> S;
    /// `∂_x b_i`.
    fn d_own(&self, i: usize, t: S, own: S, pop: &[S]) -> S;
    /// `∂_{y_j} b_i` for every `j`, written into `out`.
    fn d_pop(&self, i: usize, t: S, own: S, pop: &[S], out: &mut [S]);
    /// `∂²_{xx} b_i`.
    fn d2_own(&self, i: usize, t: S, own: S, pop: &[S]) -> S;
    /// `∂²_{x y_j} b_i` for every `j`.
    fn d2_own_pop(&self, i: usize, t: S, own: S, pop: &[S], out: &mut [S]);
    /// `∂²_{y_j y_k} b_i`, N×N.
    fn d2_pop(&self, i: usize, t: S, own: S, pop: &[S], out: &mut Mat<S>);

    /// True when `b_i` does not depend on `y`; lets simulators skip population terms.
    fn is_decoupled(&self) -> bool {
        false
    }
}

/// Running and terminal costs with first and second derivatives in `(x, u)`.
pub trait CostModel<S: Scalar>: Send + Sync {
    fn running(&self, i: usize, t: S, x: &[S], u: &[S]) -> S;
    /// `∂_x f_i` into `gx` and `∂_u f_i` into `gu`.
    fn running_grad(&self, i: usize, t: S, x: &[S], u: &[S], gx: &mut [S], gu: &mut [S]);
    #[allow(clippy::too_many_arguments)]
    /// `hxx[h][l] = ∂²_{x_h x_l} f_i`, `hxu[h][l] = ∂²_{x_h u_l} f_i`, `huu[h][l] = ∂²_{u_h u_l} f_i`.
    fn running_hess(&self, i: usize, t: S, x: &[S], u: &[S], hxx: &mut Mat<S>, hxu: &mut Mat<S>, huu: &mut Mat<S>);
    fn terminal(&self, i: usize, x: &[S]) -> S;
    fn terminal_grad(&self, i: usize, x: &[S], g: &mut [S]);
    fn terminal_hess(&self, i: usize, x: &[S], h: &mut Mat<S>);
}

/// Everything a simulator or estimator needs from a game.
pub trait DifferentialGame<S: Scalar>: Send + Sync {
    fn n_players(&self) -> usize;
    fn horizon(&self) -> S;
    fn initial_state(&self) -> &[S];
    fn volatility(&self, i: usize, t: S) -> S;
    fn drift(&self) -> &dyn DriftModel<S>;
    fn cost(&self) -> &dyn CostModel<S>;
}
