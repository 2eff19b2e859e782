//! Concrete drift and cost evaluators used as fixtures for the general game form.

use super::general::DriftBounds;
use super::traits::{CostModel, DriftModel};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// `b_i = c0_i + c1_i sin(x) + (λ/N) Σ_j tanh(y_j)`: nonlinear in the own state and
/// coupled through the population average of `tanh`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldTanhDrift {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub lambda: f64,
}

impl MeanFieldTanhDrift {
    pub fn bounds(&self) -> DriftBounds {
        let l_b = self.c0.iter().chain(&self.c1).fold(0.0f64, |m, v| m.max(v.abs()));
        // |sech²| ≤ 1 and |2 tanh sech²| ≤ 4/(3√3) < 1
        DriftBounds { l_b, l_b_y: self.lambda.abs() }
    }

    fn lam_n<S: Scalar>(&self, n: usize) -> S {
        S::of(self.lambda / n as f64)
    }
}

impl<S: Scalar> DriftModel<S> for MeanFieldTanhDrift {
    fn value(&self, i: usize, _t: S, own: S, pop: &[S]) -> S {
        let mean_field: S = pop.iter().map(|y| y.tanh()).sum();
        S::of(self.c0[i]) + S::of(self.c1[i]) * own.sin() + self.lam_n::<S>(pop.len()) * mean_field
    }
    fn d_own(&self, i: usize, _t: S, own: S, _pop: &[S]) -> S {
        S::of(self.c1[i]) * own.cos()
    }
    fn d_pop(&self, _i: usize, _t: S, _own: S, pop: &[S], out: &mut [S]) {
        let c = self.lam_n::<S>(pop.len());
        for (o, y) in out.iter_mut().zip(pop) {
            let th = y.tanh();
            *o = c * (S::one() - th * th);
        }
    }
    fn d2_own(&self, i: usize, _t: S, own: S, _pop: &[S]) -> S {
        -S::of(self.c1[i]) * own.sin()
    }
    fn d2_own_pop(&self, _i: usize, _t: S, _own: S, _pop: &[S], out: &mut [S]) {
        out.fill(S::zero());
    }
    fn d2_pop(&self, _i: usize, _t: S, _own: S, pop: &[S], out: &mut Mat<S>) {
        out.as_mut_slice().fill(S::zero());
        let c = self.lam_n::<S>(pop.len());
        for (j, y) in pop.iter().enumerate() {
            let th = y.tanh();
            out[(j, j)] = -S::two() * c * th * (S::one() - th * th);
        }
    }
}

/// Decoupled drift `b_i = a_i x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDrift {
    pub a: Vec<f64>,
}

impl LinearDrift {
    pub fn bounds(&self) -> DriftBounds {
        DriftBounds { l_b: self.a.iter().fold(0.0f64, |m, v| m.max(v.abs())), l_b_y: 0.0 }
    }
}

impl<S: Scalar> DriftModel<S> for LinearDrift {
    fn value(&self, i: usize, _t: S, own: S, _pop: &[S]) -> S {
        S::of(self.a[i]) * own
    }
    fn d_own(&self, i: usize, _t: S, _own: S, _pop: &[S]) -> S {
        S::of(self.a[i])
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

/// Even interaction kernel `φ(z) = √(1+z²)` with bounded second derivative.
#[inline]
fn phi<S: Scalar>(z: S) -> (S, S, S) {
    let r = (S::one() + z * z).sqrt();
    (r, z / r, S::one() / (r * r * r))
}

/// Costs made of private terms plus a pairwise interaction energy shared by all players:
///
/// `f_i = u_i² + η_i x_i² + ρ_i x_i u_i + (2κ/N²) Σ_{l≠i} φ(x_i − x_l)`,
/// `g_i = γ_i (x_i − d_i)² + (2κ_g/N²) Σ_{l≠i} φ(x_i − x_l)`.
///
/// Each interaction sum is the change in `κ ∫∫ φ(x−x') dμ dμ` caused by moving `x_i`,
/// so with a decoupled drift the game is an exact potential game.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributedCost {
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub d: Vec<f64>,
    pub kappa: f64,
    pub kappa_g: f64,
}

impl DistributedCost {
    /// Heterogeneous but bounded coefficients for `n` players.
    pub fn heterogeneous(n: usize) -> Self {
        let s = |k: usize, amp: f64, shift: f64| (1..=n).map(|i| shift + amp * ((i * k) as f64).sin()).collect::<Vec<_>>();
        Self { eta: s(1, 0.5, 1.0), rho: s(2, 0.3, 0.0), gamma: s(3, 0.5, 1.0), d: s(5, 1.0, 0.0), kappa: 1.5, kappa_g: 0.7 }
    }

    fn interaction<S: Scalar>(i: usize, x: &[S], c: S) -> S {
        let mut acc = S::zero();
        for (l, &xl) in x.iter().enumerate() {
            if l != i {
                acc += phi(x[i] - xl).0;
            }
        }
        c * acc
    }

    fn interaction_grad<S: Scalar>(i: usize, x: &[S], c: S, g: &mut [S]) {
        for (l, &xl) in x.iter().enumerate() {
            if l != i {
                let d1 = phi(x[i] - xl).1 * c;
                g[i] += d1;
                g[l] -= d1;
            }
        }
    }

    fn interaction_hess<S: Scalar>(i: usize, x: &[S], c: S, h: &mut Mat<S>) {
        for (l, &xl) in x.iter().enumerate() {
            if l != i {
                let d2 = phi(x[i] - xl).2 * c;
                h[(i, i)] += d2;
                h[(l, l)] += d2;
                h[(i, l)] -= d2;
                h[(l, i)] -= d2;
            }
        }
    }

    fn coupling<S: Scalar>(k: f64, n: usize) -> S {
        S::of(2.0 * k / (n * n) as f64)
    }
}

impl<S: Scalar> CostModel<S> for DistributedCost {
    fn running(&self, i: usize, _t: S, x: &[S], u: &[S]) -> S {
        let (xi, ui) = (x[i], u[i]);
        ui * ui + S::of(self.eta[i]) * xi * xi + S::of(self.rho[i]) * xi * ui
            + Self::interaction(i, x, Self::coupling::<S>(self.kappa, x.len()))
    }
    fn running_grad(&self, i: usize, _t: S, x: &[S], u: &[S], gx: &mut [S], gu: &mut [S]) {
        gx.fill(S::zero());
        gu.fill(S::zero());
        gx[i] = S::two() * S::of(self.eta[i]) * x[i] + S::of(self.rho[i]) * u[i];
        gu[i] = S::two() * u[i] + S::of(self.rho[i]) * x[i];
        Self::interaction_grad(i, x, Self::coupling::<S>(self.kappa, x.len()), gx);
    }
    fn running_hess(&self, i: usize, _t: S, x: &[S], _u: &[S], hxx: &mut Mat<S>, hxu: &mut Mat<S>, huu: &mut Mat<S>) {
        hxx.as_mut_slice().fill(S::zero());
        hxu.as_mut_slice().fill(S::zero());
        huu.as_mut_slice().fill(S::zero());
        hxx[(i, i)] = S::two() * S::of(self.eta[i]);
        hxu[(i, i)] = S::of(self.rho[i]);
        huu[(i, i)] = S::two();
        Self::interaction_hess(i, x, Self::coupling::<S>(self.kappa, x.len()), hxx);
    }
    fn terminal(&self, i: usize, x: &[S]) -> S {
        let e = x[i] - S::of(self.d[i]);
        S::of(self.gamma[i]) * e * e + Self::interaction(i, x, Self::coupling::<S>(self.kappa_g, x.len()))
    }
    fn terminal_grad(&self, i: usize, x: &[S], g: &mut [S]) {
        g.fill(S::zero());
        g[i] = S::two() * S::of(self.gamma[i]) * (x[i] - S::of(self.d[i]));
        Self::interaction_grad(i, x, Self::coupling::<S>(self.kappa_g, x.len()), g);
    }
    fn terminal_hess(&self, i: usize, x: &[S], h: &mut Mat<S>) {
        h.as_mut_slice().fill(S::zero());
        h[(i, i)] = S::two() * S::of(self.gamma[i]);
        Self::interaction_hess(i, x, Self::coupling::<S>(self.kappa_g, x.len()), h);
    }
}

/// Costs depending on other players only through empirical averages:
///
/// `f_i = (1/N) Σ x_l² + θ_i u_i² + κ_i (x̄ − m_i)² + (ρ_i/N) Σ x_l u_l`,
/// `g_i = γ_i (x̄ − d_i)² + (ν_i/N) Σ x_l²`, with `x̄ = (1/N) Σ x_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldCost {
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub d: Vec<f64>,
    pub nu: Vec<f64>,
}

impl MeanFieldCost {
    pub fn heterogeneous(n: usize) -> Self {
        let s = |k: usize, amp: f64, shift: f64| (1..=n).map(|i| shift + amp * ((i * k) as f64).sin()).collect::<Vec<_>>();
        Self {
            theta: s(1, 0.3, 1.0),
            kappa: s(2, 0.5, 1.0),
            m: s(3, 1.0, 0.0),
            rho: s(4, 0.5, 0.0),
            gamma: s(5, 0.5, 1.0),
            d: s(6, 1.0, 0.0),
            nu: s(7, 0.3, 0.5),
        }
    }

    /// Even- and odd-indexed players share parameters, so the worst pair is the same at every `N`.
    pub fn two_type(n: usize) -> Self {
        let s = |a: f64, b: f64| (0..n).map(|i| if i % 2 == 0 { a } else { b }).collect::<Vec<_>>();
        Self {
            theta: s(1.0, 1.3),
            kappa: s(1.0, 1.5),
            m: s(0.5, -0.5),
            rho: s(0.0, 0.5),
            gamma: s(1.0, 1.5),
            d: s(1.0, -1.0),
            nu: s(0.5, 0.8),
        }
    }

    fn mean<S: Scalar>(x: &[S]) -> S {
        x.iter().copied().sum::<S>() / S::of_usize(x.len())
    }
}

impl<S: Scalar> CostModel<S> for MeanFieldCost {
    fn running(&self, i: usize, _t: S, x: &[S], u: &[S]) -> S {
        let nn = S::of_usize(x.len());
        let sq: S = x.iter().map(|&v| v * v).sum();
        let xu: S = x.iter().zip(u).map(|(&a, &b)| a * b).sum();
        let e = Self::mean(x) - S::of(self.m[i]);
        sq / nn + S::of(self.theta[i]) * u[i] * u[i] + S::of(self.kappa[i]) * e * e + S::of(self.rho[i]) * xu / nn
    }
    fn running_grad(&self, i: usize, _t: S, x: &[S], u: &[S], gx: &mut [S], gu: &mut [S]) {
        let nn = S::of_usize(x.len());
        let e = Self::mean(x) - S::of(self.m[i]);
        let rho = S::of(self.rho[i]);
        let common = S::two() * S::of(self.kappa[i]) * e / nn;
        for l in 0..x.len() {
            gx[l] = S::two() * x[l] / nn + common + rho * u[l] / nn;
            gu[l] = rho * x[l] / nn;
        }
        gu[i] += S::two() * S::of(self.theta[i]) * u[i];
    }
    fn running_hess(&self, i: usize, _t: S, x: &[S], _u: &[S], hxx: &mut Mat<S>, hxu: &mut Mat<S>, huu: &mut Mat<S>) {
        let n = x.len();
        let nn = S::of_usize(n);
        let off = S::two() * S::of(self.kappa[i]) / (nn * nn);
        huu.as_mut_slice().fill(S::zero());
        hxu.as_mut_slice().fill(S::zero());
        for k in 0..n {
            for l in 0..n {
                hxx[(k, l)] = off;
            }
            hxx[(k, k)] += S::two() / nn;
            hxu[(k, k)] = S::of(self.rho[i]) / nn;
        }
        huu[(i, i)] = S::two() * S::of(self.theta[i]);
    }
    fn terminal(&self, i: usize, x: &[S]) -> S {
        let nn = S::of_usize(x.len());
        let e = Self::mean(x) - S::of(self.d[i]);
        let sq: S = x.iter().map(|&v| v * v).sum();
        S::of(self.gamma[i]) * e * e + S::of(self.nu[i]) * sq / nn
    }
    fn terminal_grad(&self, i: usize, x: &[S], g: &mut [S]) {
        let nn = S::of_usize(x.len());
        let e = Self::mean(x) - S::of(self.d[i]);
        let common = S::two() * S::of(self.gamma[i]) * e / nn;
        for l in 0..x.len() {
            g[l] = common + S::two() * S::of(self.nu[i]) * x[l] / nn;
        }
    }
    fn terminal_hess(&self, i: usize, x: &[S], h: &mut Mat<S>) {
        let n = x.len();
        let nn = S::of_usize(n);
        let off = S::two() * S::of(self.gamma[i]) / (nn * nn);
        for k in 0..n {
            for l in 0..n {
                h[(k, l)] = off;
            }
            h[(k, k)] += S::two() * S::of(self.nu[i]) / nn;
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::game_model::coefficient::Coefficient;
    use crate::game_model::general::GeneralGameSpec;

    fn game(n: usize, drift: Arc<dyn DriftModel<f64>>, cost: Arc<dyn CostModel<f64>>, b: DriftBounds) -> GeneralGameSpec<f64> {
        GeneralGameSpec::new(1.0, drift, cost, vec![Coefficient::constant(0.5); n], vec![0.2; n], b).unwrap()
    }

    #[test]
    fn fixtures_pass_derivative_checks() {
        let n = 4;
        let drift = MeanFieldTanhDrift { c0: vec![0.1, -0.2, 0.3, 0.0], c1: vec![0.5, 0.4, -0.3, 0.2], lambda: 1.2 };
        let b = drift.bounds();
        let g = game(n, Arc::new(drift), Arc::new(MeanFieldCost::heterogeneous(n)), b);
        g.check_derivatives(10, 3, 1e-5).unwrap();
        assert!(g.check_drift_scaling(200, 4).unwrap() <= 1.0);

        let lin = LinearDrift { a: vec![0.2, -0.1, 0.0, 0.3] };
        let b = lin.bounds();
        let g = game(n, Arc::new(lin), Arc::new(DistributedCost::heterogeneous(n)), b);
        g.check_derivatives(10, 5, 1e-5).unwrap();
    }

    #[test]
    fn wrong_derivative_is_caught() {
        struct Broken;
        impl DriftModel<f64> for Broken {
            fn value(&self, _i: usize, _t: f64, own: f64, _pop: &[f64]) -> f64 {
                own * own
            }
            fn d_own(&self, _i: usize, _t: f64, own: f64, _pop: &[f64]) -> f64 {
                own
            }
            fn d_pop(&self, _i: usize, _t: f64, _own: f64, _pop: &[f64], out: &mut [f64]) {
                out.fill(0.0);
            }
            fn d2_own(&self, _i: usize, _t: f64, _own: f64, _pop: &[f64]) -> f64 {
                1.0
            }
            fn d2_own_pop(&self, _i: usize, _t: f64, _own: f64, _pop: &[f64], out: &mut [f64]) {
                out.fill(0.0);
            }
            fn d2_pop(&self, _i: usize, _t: f64, _own: f64, _pop: &[f64], out: &mut Mat<f64>) {
                out.as_mut_slice().fill(0.0);
            }
        }
        let g = game(2, Arc::new(Broken), Arc::new(MeanFieldCost::heterogeneous(2)), DriftBounds::default());
        assert!(g.check_derivatives(5, 1, 1e-5).is_err());
    }
}
