use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PairBoundTable;
use crate::game_model::{DifferentialGame, LqGameSpec};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    Analytic,
    /// Maximum over sampled points; a lower estimate of the true sup-norm.
    EstimatedSupNorm,
}

/// Sup-norm bounds on derivatives of `Δf = f_i − f_j` and `Δg = g_i − g_j` for one
/// ordered pair. `d2f_xu[(h, l)]` bounds `∂²_{x_h u_l} Δf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostDerivBounds {
    pub d2f_xx: Mat<f64>,
    pub d2f_xu: Mat<f64>,
    pub d2f_uu_ij: f64,
    /// Time-L² norm of `(∂_{x_h} Δf)(·, 0, 0)`.
    pub d1f_x0: Vec<f64>,
    pub d2g_xx: Mat<f64>,
    pub d1g_x0: Vec<f64>,
    pub source: BoundSource,
}

impl CostDerivBounds {
    pub fn zeros(n: usize) -> Self {
        Self {
            d2f_xx: Mat::zeros(n, n),
            d2f_xu: Mat::zeros(n, n),
            d2f_uu_ij: 0.0,
            d1f_x0: vec![0.0; n],
            d2g_xx: Mat::zeros(n, n),
            d1g_x0: vec![0.0; n],
            source: BoundSource::Analytic,
        }
    }

    pub fn n(&self) -> usize {
        self.d1f_x0.len()
    }
}

/// Closed-form bounds for the LQ graph game.
pub fn lq_cost_deriv_bounds<S: Scalar>(spec: &LqGameSpec<S>, i: usize, j: usize) -> CostDerivBounds {
    let n = spec.n_players;
    let q = |a: usize, b: usize| spec.q[(a, b)].as_f64();
    let nf = n as f64;
    // ∂²_{xx} f_k has entries (2/N)Σ_l q_kl at (k,k), (2/N)q_kl at (l,l) and -(2/N)q_kl at (k,l),(l,k).
    let hess = |k: usize| {
        let mut h = Mat::<f64>::zeros(n, n);
        for l in (0..n).filter(|&l| l != k) {
            let c = 2.0 * q(k, l) / nf;
            h[(k, k)] += c;
            h[(l, l)] += c;
            h[(k, l)] -= c;
            h[(l, k)] -= c;
        }
        h
    };
    let diff = hess(i).sub(&hess(j));
    let mut b = CostDerivBounds::zeros(n);
    b.d2f_xx = Mat::from_fn(n, n, |a, c| diff[(a, c)].abs());
    let (gi, gj) = (spec.gamma[i].as_f64(), spec.gamma[j].as_f64());
    b.d2g_xx[(i, i)] = 2.0 * gi;
    b.d2g_xx[(j, j)] = 2.0 * gj;
    b.d1g_x0[i] = (2.0 * gi * spec.d[i].as_f64()).abs();
    b.d1g_x0[j] = (2.0 * gj * spec.d[j].as_f64()).abs();
    b
}

pub fn lq_pair_bounds<S: Scalar>(spec: &LqGameSpec<S>) -> PairBoundTable {
    let n = spec.n_players;
    let mut t = PairBoundTable::new(n);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            t.insert(i, j, lq_cost_deriv_bounds(spec, i, j));
        }
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub samples: usize,
    /// Sampling box is `[-half_width, half_width]^{2N} × [0, T]`.
    pub half_width: f64,
    pub seed: u32,
    /// Trapezoid steps for the time-L² norms; `None` uses the solver default.
    pub time_steps: Option<usize>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { samples: 10_000, half_width: 5.0, seed: 0, time_steps: None }
    }
}

struct PointSource {
    sobol: bool,
    seed: u32,
}

impl PointSource {
    fn new(dims: usize, samples: usize, seed: u32) -> Self {
        let sobol = dims <= sobol_burley::NUM_DIMENSIONS as usize && samples <= 1 << 16;
        if !sobol {
            log::warn!("{dims} dimensions or {samples} samples exceed the Sobol table; using pseudo-random points");
        }
        Self { sobol, seed }
    }

    fn point(&self, index: usize, dims: usize) -> Vec<f64> {
        if self.sobol {
            (0..dims).map(|d| sobol_burley::sample(index as u32, d as u32, self.seed) as f64).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed as u64);
            rng.set_stream(index as u64);
            (0..dims).map(|_| rng.random::<f64>()).collect()
        }
    }
}

/// Derivative bounds for every ordered pair estimated by maximizing over sample points.
pub fn empirical_pair_bounds<S: Scalar>(game: &dyn DifferentialGame<S>, opts: &SamplingOptions) -> PairBoundTable {
    let n = game.n_players();
    let horizon = game.horizon().as_f64();
    let dims = 2 * n + 1;
    let src = PointSource::new(dims, opts.samples, opts.seed);
    let points: Vec<(S, Vec<S>, Vec<S>)> = (0..opts.samples)
        .map(|k| {
            let p = src.point(k, dims);
            let map = |v: f64| S::of((2.0 * v - 1.0) * opts.half_width);
            (S::of(p[2 * n] * horizon), p[..n].iter().map(|&v| map(v)).collect(), p[n..2 * n].iter().map(|&v| map(v)).collect())
        })
        .collect();
    let cost = game.cost();

    let hessians = |k: usize, t: S, x: &[S], u: &[S]| {
        let (mut hxx, mut hxu, mut huu, mut hg) = (Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n));
        cost.running_hess(k, t, x, u, &mut hxx, &mut hxu, &mut huu);
        cost.terminal_hess(k, x, &mut hg);
        (hxx, hxu, huu, hg)
    };

    // First-order terms at the origin do not depend on the sample points.
    let steps = opts.time_steps.unwrap_or_else(|| crate::ode_solvers::default_steps(horizon));
    let zeros = vec![S::zero(); n];
    let grads_at_origin: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut gx = vec![S::zero(); n];
            let mut gu = vec![S::zero(); n];
            let running = (0..=steps)
                .map(|s| {
                    let t = S::of(horizon * s as f64 / steps as f64);
                    cost.running_grad(k, t, &zeros, &zeros, &mut gx, &mut gu);
                    gx.iter().map(|v| v.as_f64()).collect()
                })
                .collect();
            let mut gg = vec![S::zero(); n];
            cost.terminal_grad(k, &zeros, &mut gg);
            (running, gg.iter().map(|v| v.as_f64()).collect())
        })
        .collect();
    let dt = horizon / steps as f64;

    let rows: Vec<Vec<(usize, CostDerivBounds)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out: Vec<(usize, CostDerivBounds)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let mut b = CostDerivBounds::zeros(n);
                    b.source = BoundSource::EstimatedSupNorm;
                    for h in 0..n {
                        let sq: Vec<f64> = (0..=steps)
                            .map(|s| {
                                let d = grads_at_origin[i].0[s][h] - grads_at_origin[j].0[s][h];
                                d * d
                            })
                            .collect();
                        b.d1f_x0[h] = trapezoid(&sq, dt).sqrt();
                        b.d1g_x0[h] = (grads_at_origin[i].1[h] - grads_at_origin[j].1[h]).abs();
                    }
                    (j, b)
                })
                .collect();
            for (t, x, u) in &points {
                let hi = hessians(i, *t, x, u);
                for (j, b) in out.iter_mut() {
                    let hj = hessians(*j, *t, x, u);
                    max_abs_diff(&mut b.d2f_xx, &hi.0, &hj.0);
                    max_abs_diff(&mut b.d2f_xu, &hi.1, &hj.1);
                    max_abs_diff(&mut b.d2g_xx, &hi.3, &hj.3);
                    let uu = (hi.2[(i, *j)] - hj.2[(i, *j)]).as_f64().abs();
                    b.d2f_uu_ij = b.d2f_uu_ij.max(uu);
                }
            }
            out
        })
        .collect();

    let mut table = PairBoundTable::new(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, b) in row {
            table.insert(i, j, b);
        }
    }
    table
}

fn max_abs_diff<S: Scalar>(acc: &mut Mat<f64>, a: &Mat<S>, b: &Mat<S>) {
    for ((o, &x), &y) in acc.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
        *o = o.max((x - y).as_f64().abs());
    }
}

pub(crate) fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => dt * (values[1..len - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[len - 1])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha_bounds::cv_constants;

    #[test]
    fn lq_c_v1_tracks_weight_difference() {
        let q = Mat::from_rows(&[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let spec = LqGameSpec::with_constants(1.0, q, vec![1.0, 2.0], vec![0.5, 0.0], 0.0, 1.0, vec![0.0; 2]).unwrap();
        let b = lq_cost_deriv_bounds(&spec, 0, 1);
        let (c1, _, _) = cv_constants(&b, 0, 1, 2).unwrap();
        // 2|q_01 − q_10| / N
        assert!((c1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_matches_analytic_for_constant_hessians() {
        let q = Mat::from_rows(&[vec![0.0, 3.0, 1.0], vec![1.0, 0.0, 0.5], vec![0.2, 0.0, 0.0]]).unwrap();
        let spec = LqGameSpec::with_constants(0.5, q, vec![1.0, 2.0, 0.3], vec![0.5, -1.0, 0.0], 0.1, 1.0, vec![0.0; 3]).unwrap();
        let emp = empirical_pair_bounds(&spec, &SamplingOptions { samples: 16, ..Default::default() });
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let a = lq_cost_deriv_bounds(&spec, i, j);
                let e = emp.get(i, j).unwrap();
                assert!(a.d2f_xx.sub(&e.d2f_xx).max_abs() < 1e-12);
                assert!(a.d2g_xx.sub(&e.d2g_xx).max_abs() < 1e-12);
                for h in 0..3 {
                    assert!((a.d1g_x0[h] - e.d1g_x0[h]).abs() < 1e-12);
                    assert!(e.d1f_x0[h].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let v: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        assert!((trapezoid(&v, 0.1) - 0.5).abs() < 1e-14);
    }
}
