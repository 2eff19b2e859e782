//! Shared fixtures and an independent adaptive-step integrator for the Riccati system.
#![allow(dead_code)]

use alphapot::game_model::Coefficient;
use alphapot::{LqGameSpec, Mat};
use ode_solvers::{DVector, Dopri5, OutputType, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random LQ spec with smooth time-dependent drift rates.
pub fn random_spec(r: &mut ChaCha8Rng, n: usize, horizon: f64, symmetric: bool, sigma: f64) -> LqGameSpec {
    let mut q = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { r.random_range(0.0..2.0) });
    if symmetric {
        for i in 0..n {
            for j in 0..i {
                q[(i, j)] = q[(j, i)];
            }
        }
    }
    let gamma = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let d = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let a_fn = (0..n)
        .map(|_| Coefficient::Sinusoid {
            offset: r.random_range(-0.5..0.5),
            amplitude: 0.3,
            frequency: 2.0,
            phase: r.random_range(0.0..6.0),
        })
        .collect();
    let sigma_fn = (0..n).map(|_| Coefficient::constant(sigma)).collect();
    let x0 = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    LqGameSpec::new(horizon, q, gamma, d, a_fn, sigma_fn, x0, 1e6).unwrap()
}

/// Riccati system written out from scratch on a flat state `(M0, M1, M2, M3)`, in
/// reversed time `s = T − t` so the integration runs forward.
struct Coupled {
    n: usize,
    spec: LqGameSpec,
}

impl Coupled {
    fn dims(&self) -> (usize, usize) {
        (2 * self.n, 4 * self.n)
    }

    fn gain(&self, m0: &[f64], m1: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (d2, d4) = self.dims();
        let it = |i: usize, c: usize| -> f64 {
            match (c / n, c % n == i) {
                (_, false) => 0.0,
                (0, true) => 0.5,
                (1, true) => 1.0,
                (2, true) => 1.0 / 3.0,
                _ => 0.5,
            }
        };
        let mut k = vec![0.0; n * d4];
        for i in 0..n {
            for c in 0..d4 {
                let mut v = 0.0;
                for m in 0..d4 {
                    v += it(i, m) * m1[m * d4 + c];
                }
                v += if c < d2 { m0[(n + i) * d2 + c] } else { m0[i * d2 + (c - d2)] };
                k[i * d4 + c] = v;
            }
        }
        k
    }
}

impl System<f64, DVector<f64>> for Coupled {
    fn system(&self, s_rev: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let t = self.spec.horizon - s_rev;
        let n = self.n;
        let (d2, d4) = self.dims();
        let y = y.as_slice();
        let (m0, rest) = y.split_at(d2 * d2);
        let (m1, rest) = rest.split_at(d4 * d4);
        let (m2, _) = rest.split_at(d4);
        let a: Vec<f64> = (0..d4).map(|c| self.spec.a(c % n, t)).collect();
        let s: Vec<f64> = (0..n).map(|i| self.spec.sigma(i, t)).collect();
        let mut qt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                qt[i * n + j] = if i == j {
                    (0..n).filter(|&k| k != i).map(|k| self.spec.q[(i, k)]).sum::<f64>() / n as f64
                } else {
                    -self.spec.q[(i, j)] / n as f64
                };
            }
        }
        let big_q = |r: usize, c: usize| -> f64 {
            match (r < n, c < n) {
                (true, false) => qt[(c - n) * n + r],
                (false, true) => qt[(r - n) * n + c],
                _ => 0.0,
            }
        };
        let out = dy.as_mut_slice();
        for r in 0..d2 {
            for c in 0..d2 {
                out[r * d2 + c] = -(a[r] + a[c]) * m0[r * d2 + c] - big_q(r, c);
            }
        }
        let k = self.gain(m0, m1);
        let base = d2 * d2;
        for r in 0..d4 {
            for c in 0..d4 {
                let ktk: f64 = (0..n).map(|i| k[i * d4 + r] * k[i * d4 + c]).sum();
                out[base + r * d4 + c] = -(a[r] + a[c]) * m1[r * d4 + c] + ktk;
            }
        }
        let weights = [0.5, 1.0, 1.0 / 3.0, 0.5];
        let im2: Vec<f64> = (0..n).map(|i| (0..4).map(|b| weights[b] * m2[b * n + i]).sum()).collect();
        let base2 = base + d4 * d4;
        for r in 0..d4 {
            let kt: f64 = (0..n).map(|i| k[i * d4 + r] * im2[i]).sum();
            out[base2 + r] = -a[r] * m2[r] + kt;
        }
        let mut g = 0.0;
        for i in 0..n {
            let j = m1[i * d4 + i]
                + 0.5 * (m1[i * d4 + d2 + i] + m1[(d2 + i) * d4 + i])
                + 0.25 * m1[(d2 + i) * d4 + d2 + i];
            g += s[i] * s[i] * (m0[i * d2 + i] + j);
        }
        g -= im2.iter().map(|v| v * v).sum::<f64>();
        out[base2 + d4] = -g;
        for v in out.iter_mut() {
            *v = -*v;
        }
    }
}

pub struct OracleValues {
    pub m0: Mat,
    pub m1: Mat,
    pub m2: Vec<f64>,
    pub m3: f64,
}

/// Integrates the Riccati system from `T` back to `0` with Dormand-Prince 5(4).
pub fn riccati_oracle(spec: &LqGameSpec, tol: f64) -> OracleValues {
    let n = spec.n_players;
    let (d2, d4) = (2 * n, 4 * n);
    let mut y0 = vec![0.0; d2 * d2 + d4 * d4 + d4 + 1];
    for i in 0..n {
        y0[i * d2 + n + i] = spec.gamma[i];
        y0[(n + i) * d2 + i] = spec.gamma[i];
        y0[d2 * d2 + d4 * d4 + n + i] = -spec.gamma[i] * spec.d[i];
    }
    let t = spec.horizon;
    let sys = Coupled { n, spec: spec.clone() };
    // Sparse output: the crate's dense interpolation is far less accurate than its steps.
    let mut solver = Dopri5::from_param(
        sys,
        0.0,
        t,
        0.0,
        DVector::from_vec(y0),
        tol,
        tol,
        0.9,
        0.04,
        0.2,
        10.0,
        t / 20.0,
        0.0,
        1_000_000,
        1000,
        OutputType::Sparse,
    );
    solver.integrate().expect("adaptive integration");
    let y = solver.y_out().last().expect("output").as_slice().to_vec();
    let m0 = Mat::from_vec(d2, d2, y[..d2 * d2].to_vec()).unwrap();
    let m1 = Mat::from_vec(d4, d4, y[d2 * d2..d2 * d2 + d4 * d4].to_vec()).unwrap();
    let off = d2 * d2 + d4 * d4;
    OracleValues { m0, m1, m2: y[off..off + d4].to_vec(), m3: y[off + d4] }
}
