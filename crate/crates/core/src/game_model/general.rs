use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coefficient::Coefficient;
use super::lq::LqGameSpec;
use super::traits::{CostModel, DifferentialGame, DriftModel};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Growth constants of a drift in the mean-field class.
///
/// `l_b` bounds `|b_i(t,0,0)|`, `|∂_x b_i|` and `|∂²_{xx} b_i|`. `l_b_y` is such that
/// `|∂_{y_j} b_i|`, `|∂²_{x y_j} b_i|` and `|∂²_{y_j y_j} b_i|` are at most `l_b_y / N`
/// and `|∂²_{y_j y_k} b_i| ≤ l_b_y / N²` for `j ≠ k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftBounds {
    pub l_b: f64,
    pub l_b_y: f64,
}

impl DriftBounds {
    pub fn new(l_b: f64, l_b_y: f64) -> Result<Self> {
        let b = Self { l_b, l_b_y };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_b >= 0.0) || !self.l_b.is_finite() {
            return Err(Error::Invariant(format!("L_b = {} must be nonnegative", self.l_b)));
        }
        if !(self.l_b_y >= 0.0) || !self.l_b_y.is_finite() {
            return Err(Error::Invariant(format!("L_b_y = {} must be nonnegative", self.l_b_y)));
        }
        Ok(())
    }
}

/// A game with scalar per-player states given by drift and cost evaluators.
#[derive(Clone)]
pub struct GeneralGameSpec<S: Scalar> {
    pub n_players: usize,
    pub horizon: S,
    pub drift: Arc<dyn DriftModel<S>>,
    pub cost: Arc<dyn CostModel<S>>,
    pub sigma_fn: Vec<Coefficient>,
    pub x0: Vec<S>,
    pub drift_bounds: DriftBounds,
}

impl<S: Scalar> fmt::Debug for GeneralGameSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralGameSpec")
            .field("n_players", &self.n_players)
            .field("horizon", &self.horizon)
            .field("sigma_fn", &self.sigma_fn)
            .field("x0", &self.x0)
            .field("drift_bounds", &self.drift_bounds)
            .finish_non_exhaustive()
    }
}

/// Outcome of comparing registered derivatives with central differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub samples: usize,
    pub max_rel_error: f64,
    pub worst: String,
}

impl<S: Scalar> GeneralGameSpec<S> {
    pub fn new(
        horizon: S,
        drift: Arc<dyn DriftModel<S>>,
        cost: Arc<dyn CostModel<S>>,
        sigma_fn: Vec<Coefficient>,
        x0: Vec<S>,
        drift_bounds: DriftBounds,
    ) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(Error::Invariant("n_players must be positive".into()));
        }
        if sigma_fn.len() != n {
            return Err(Error::Invariant(format!("vol: expected {n} descriptors, got {}", sigma_fn.len())));
        }
        if !(horizon > S::zero()) {
            return Err(Error::Invariant(format!("horizon T = {horizon} must be positive")));
        }
        drift_bounds.validate()?;
        for (i, c) in sigma_fn.iter().enumerate() {
            c.validate(&format!("vol[{i}]"), horizon.as_f64())?;
        }
        Ok(Self { n_players: n, horizon, drift, cost, sigma_fn, x0, drift_bounds })
    }

    /// Views an LQ graph game through the general evaluator interface.
    pub fn from_lq(spec: &LqGameSpec<S>) -> Self {
        let shared = Arc::new(spec.clone());
        let t = spec.horizon.as_f64();
        let l_b = spec.a_fn.iter().map(|c| c.sup_norm(t, 1001)).fold(0.0, f64::max);
        Self {
            n_players: spec.n_players,
            horizon: spec.horizon,
            drift: shared.clone(),
            cost: shared,
            sigma_fn: spec.sigma_fn.clone(),
            x0: spec.x0.clone(),
            drift_bounds: DriftBounds { l_b, l_b_y: 0.0 },
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma_fn: vec![Coefficient::constant(sigma); self.n_players], ..self.clone() }
    }

    /// Compares every registered derivative with a central difference of the
    /// next-lower-order evaluator at `samples` random points in `[-box, box]`.
    pub fn check_derivatives(&self, samples: usize, seed: u64, tol: f64) -> Result<DerivativeCheck> {
        let report = derivative_check(self, samples, seed, 2.0)?;
        if report.max_rel_error > tol {
            return Err(Error::Invariant(format!(
                "registered derivative disagrees with finite differences: {} (relative error {:.3e})",
                report.worst, report.max_rel_error
            )));
        }
        Ok(report)
    }

    /// Samples derivative magnitudes and checks them against `drift_bounds`
    /// with a 5% slack. Returns the largest observed ratio to the stated bound.
    pub fn check_drift_scaling(&self, samples: usize, seed: u64) -> Result<f64> {
        let n = self.n_players;
        let nf = n as f64;
        let b = self.drift_bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut d1 = vec![S::zero(); n];
        let mut d2 = vec![S::zero(); n];
        let mut h2 = Mat::zeros(n, n);
        let ratio = |v: f64, bound: f64| if bound > 0.0 { v / bound } else if v > 0.0 { f64::INFINITY } else { 0.0 };
        let zeros = vec![S::zero(); n];
        for _ in 0..samples {
            let t = S::of(rng.random::<f64>() * self.horizon.as_f64());
            let pop: Vec<S> = (0..n).map(|_| S::of(rng.random_range(-5.0..5.0))).collect();
            for i in 0..n {
                let own = pop[i];
                let dm = &*self.drift;
                worst = worst.max(ratio(dm.value(i, t, S::zero(), &zeros).as_f64().abs(), b.l_b));
                worst = worst.max(ratio(dm.d_own(i, t, own, &pop).as_f64().abs(), b.l_b));
                worst = worst.max(ratio(dm.d2_own(i, t, own, &pop).as_f64().abs(), b.l_b));
                dm.d_pop(i, t, own, &pop, &mut d1);
                dm.d2_own_pop(i, t, own, &pop, &mut d2);
                dm.d2_pop(i, t, own, &pop, &mut h2);
                for j in 0..n {
                    worst = worst.max(ratio(d1[j].as_f64().abs(), b.l_b_y / nf));
                    worst = worst.max(ratio(d2[j].as_f64().abs(), b.l_b_y / nf));
                    for k in 0..n {
                        let scale = if j == k { nf } else { nf * nf };
                        worst = worst.max(ratio(h2[(j, k)].as_f64().abs(), b.l_b_y / scale));
                    }
                }
            }
        }
        if worst > 1.05 {
            return Err(Error::Invariant(format!(
                "sampled drift derivatives exceed the stated L_b/L_b_y scaling by factor {worst:.3}"
            )));
        }
        Ok(worst)
    }
}

impl<S: Scalar> DifferentialGame<S> for GeneralGameSpec<S> {
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
        self.sigma_fn[i].eval(t)
    }
    fn drift(&self) -> &dyn DriftModel<S> {
        &*self.drift
    }
    fn cost(&self) -> &dyn CostModel<S> {
        &*self.cost
    }
}

struct Worst {
    err: f64,
    what: String,
}

impl Worst {
    fn record(&mut self, analytic: f64, fd: f64, what: impl FnOnce() -> String) {
        let scale = 1.0f64.max(analytic.abs()).max(fd.abs());
        let err = (analytic - fd).abs() / scale;
        if err > self.err || err.is_nan() {
            self.err = if err.is_nan() { f64::INFINITY } else { err };
            self.what = what();
        }
    }
}

fn derivative_check<S: Scalar>(game: &GeneralGameSpec<S>, samples: usize, seed: u64, half_width: f64) -> Result<DerivativeCheck> {
    // Finite differences are always taken in f64 regardless of S.
    let n = game.n_players;
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Worst { err: 0.0, what: String::from("none") };
    let dm = &*game.drift;
    let cm = &*game.cost;
    let to_s = |v: &[f64]| v.iter().map(|&x| S::of(x)).collect::<Vec<S>>();
    let mut d1 = vec![S::zero(); n];
    let mut d1p = vec![S::zero(); n];
    let mut d1m = vec![S::zero(); n];
    let mut dxp = vec![S::zero(); n];
    let mut h2 = Mat::zeros(n, n);
    let (mut gx, mut gu, mut gxp, mut gup, mut gxm, mut gum) =
        (vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n]);
    let (mut hxx, mut hxu, mut huu) = (Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n));
    for _ in 0..samples {
        let t = rng.random::<f64>() * game.horizon.as_f64();
        let ts = S::of(t);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width)).collect();
        let xs = to_s(&x);
        let us = to_s(&u);
        for i in 0..n {
            let own = x[i];
            let bump = |k: usize, e: f64| {
                let mut p = x.clone();
                p[k] += e;
                to_s(&p)
            };
            // drift, own argument
            let fd = (dm.value(i, ts, S::of(own + h), &xs) - dm.value(i, ts, S::of(own - h), &xs)).as_f64() / (2.0 * h);
            w.record(dm.d_own(i, ts, S::of(own), &xs).as_f64(), fd, || format!("d_own b_{i}"));
            let fd = (dm.d_own(i, ts, S::of(own + h), &xs) - dm.d_own(i, ts, S::of(own - h), &xs)).as_f64() / (2.0 * h);
            w.record(dm.d2_own(i, ts, S::of(own), &xs).as_f64(), fd, || format!("d2_own b_{i}"));
            dm.d_pop(i, ts, S::of(own), &xs, &mut d1);
            dm.d2_own_pop(i, ts, S::of(own), &xs, &mut dxp);
            dm.d2_pop(i, ts, S::of(own), &xs, &mut h2);
            for j in 0..n {
                let (p, m) = (bump(j, h), bump(j, -h));
                let fd = (dm.value(i, ts, S::of(own), &p) - dm.value(i, ts, S::of(own), &m)).as_f64() / (2.0 * h);
                w.record(d1[j].as_f64(), fd, || format!("d_pop b_{i} / y_{j}"));
                let fd = (dm.d_own(i, ts, S::of(own), &p) - dm.d_own(i, ts, S::of(own), &m)).as_f64() / (2.0 * h);
                w.record(dxp[j].as_f64(), fd, || format!("d2_own_pop b_{i} / y_{j}"));
                dm.d_pop(i, ts, S::of(own), &p, &mut d1p);
                dm.d_pop(i, ts, S::of(own), &m, &mut d1m);
                for k in 0..n {
                    let fd = (d1p[k] - d1m[k]).as_f64() / (2.0 * h);
                    w.record(h2[(k, j)].as_f64(), fd, || format!("d2_pop b_{i} / y_{k} y_{j}"));
                }
            }
            // running cost
            cm.running_grad(i, ts, &xs, &us, &mut gx, &mut gu);
            cm.running_hess(i, ts, &xs, &us, &mut hxx, &mut hxu, &mut huu);
            for k in 0..n {
                let (p, m) = (bump(k, h), bump(k, -h));
                let fd = (cm.running(i, ts, &p, &us) - cm.running(i, ts, &m, &us)).as_f64() / (2.0 * h);
                w.record(gx[k].as_f64(), fd, || format!("∂x_{k} f_{i}"));
                cm.running_grad(i, ts, &p, &us, &mut gxp, &mut gup);
                cm.running_grad(i, ts, &m, &us, &mut gxm, &mut gum);
                for l in 0..n {
                    let fd = (gxp[l] - gxm[l]).as_f64() / (2.0 * h);
                    w.record(hxx[(k, l)].as_f64(), fd, || format!("∂²x_{k}x_{l} f_{i}"));
                    let fd = (gup[l] - gum[l]).as_f64() / (2.0 * h);
                    w.record(hxu[(k, l)].as_f64(), fd, || format!("∂²x_{k}u_{l} f_{i}"));
                }
                let mut up = u.clone();
                up[k] += h;
                let mut um = u.clone();
                um[k] -= h;
                let (ups, ums) = (to_s(&up), to_s(&um));
                let fd = (cm.running(i, ts, &xs, &ups) - cm.running(i, ts, &xs, &ums)).as_f64() / (2.0 * h);
                w.record(gu[k].as_f64(), fd, || format!("∂u_{k} f_{i}"));
                cm.running_grad(i, ts, &xs, &ups, &mut gxp, &mut gup);
                cm.running_grad(i, ts, &xs, &ums, &mut gxm, &mut gum);
                for l in 0..n {
                    let fd = (gup[l] - gum[l]).as_f64() / (2.0 * h);
                    w.record(huu[(k, l)].as_f64(), fd, || format!("∂²u_{k}u_{l} f_{i}"));
                }
            }
            // terminal cost
            cm.terminal_grad(i, &xs, &mut gx);
            cm.terminal_hess(i, &xs, &mut hxx);
            for k in 0..n {
                let (p, m) = (bump(k, h), bump(k, -h));
                let fd = (cm.terminal(i, &p) - cm.terminal(i, &m)).as_f64() / (2.0 * h);
                w.record(gx[k].as_f64(), fd, || format!("∂x_{k} g_{i}"));
                cm.terminal_grad(i, &p, &mut gxp);
                cm.terminal_grad(i, &m, &mut gxm);
                for l in 0..n {
                    let fd = (gxp[l] - gxm[l]).as_f64() / (2.0 * h);
                    w.record(hxx[(k, l)].as_f64(), fd, || format!("∂²x_{k}x_{l} g_{i}"));
                }
            }
        }
    }
    Ok(DerivativeCheck { samples, max_rel_error: w.err, worst: w.what })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_view_passes_derivative_check() {
        let q = Mat::from_rows(&[vec![0.0, 1.0, 0.5], vec![2.0, 0.0, 0.0], vec![0.3, 0.7, 0.0]]).unwrap();
        let spec = LqGameSpec::with_constants(1.0, q, vec![1.0, 0.5, 2.0], vec![0.1, 0.0, -0.3], 0.4, 1.0, vec![0.0; 3]).unwrap();
        let g = GeneralGameSpec::from_lq(&spec);
        let rep = g.check_derivatives(20, 7, 1e-5).unwrap();
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
        assert!(g.check_drift_scaling(50, 1).unwrap() <= 1.0);
    }

    #[test]
    fn negative_bounds_rejected() {
        assert!(DriftBounds::new(-1.0, 0.0).is_err());
        assert!(DriftBounds::new(0.0, f64::NAN).is_err());
    }
}
