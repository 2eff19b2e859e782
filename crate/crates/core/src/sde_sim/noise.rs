use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode_solvers::TimeGrid;
use crate::scalar::Scalar;

/// How the auxiliary uniform variable `r` is carried by a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RMode {
    /// One i.i.d. uniform draw per path.
    Sampled,
    /// `k` Gauss–Legendre nodes on `[0,1]`, shared by every path.
    Quadrature(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", rename_all = "snake_case")]
pub enum RValues<S> {
    Sampled(Vec<S>),
    Quadrature { nodes: Vec<S>, weights: Vec<S> },
}

/// `k`-point Gauss–Legendre rule mapped to `[0,1]`, nodes ascending.
pub fn gauss_legendre_unit<S: Scalar>(k: usize) -> Result<(Vec<S>, Vec<S>)> {
    let deg = NonZeroUsize::new(k).ok_or_else(|| Error::InvalidArgument("quadrature needs at least one node".into()))?;
    let mut pairs: Vec<(f64, f64)> =
        GaussLegendre::new(deg).as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().map(|(x, w)| (S::of(x), S::of(w))).unzip())
}

const R_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const BRIDGE_SALT: u64 = 0xd1b5_4a32_d192_ed03;

/// Seeded Brownian increments and `r` values shared across estimators.
///
/// Increments are not stored: path `p` is regenerated on demand from a ChaCha8
/// stream keyed by `(seed, p)`, so any evaluation order gives the same numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NoiseBatch<S> {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: TimeGrid<S>,
    pub n_dims: usize,
    pub r: RValues<S>,
    /// Odd paths reuse the draws of the preceding even path with flipped sign.
    pub antithetic: bool,
    /// Number of fine steps per root step; the root grid draws the increments and
    /// refinements split them by Brownian bridges.
    pub refinement: usize,
    /// Increments from this step on are replaced by zero.
    pub zero_from: Option<usize>,
}

impl<S: Scalar> NoiseBatch<S> {
    pub fn new(seed: u64, n_paths: usize, grid: TimeGrid<S>, n_dims: usize, r_mode: RMode) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidArgument("noise batch needs at least one path".into()));
        }
        let r = match r_mode {
            RMode::Sampled => RValues::Sampled(
                (0..n_paths)
                    .map(|p| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ R_STREAM_SALT);
                        rng.set_stream(p as u64);
                        S::of(rng.random::<f64>())
                    })
                    .collect(),
            ),
            RMode::Quadrature(k) => {
                let (nodes, weights) = gauss_legendre_unit(k)?;
                RValues::Quadrature { nodes, weights }
            }
        };
        Ok(Self { seed, n_paths, grid, n_dims, r, antithetic: false, refinement: 1, zero_from: None })
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    /// Same Brownian paths on a grid with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("refinement factor must be positive".into()));
        }
        let mut out = self.clone();
        out.grid = self.grid.refine(factor)?;
        out.refinement = self.refinement * factor;
        out.zero_from = self.zero_from.map(|k| k * factor);
        Ok(out)
    }

    /// Copy whose increments vanish from step `k` on.
    pub fn truncated_after(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.zero_from = Some(k);
        out
    }

    /// Copy sharing the noise but carrying different `r` values.
    pub fn with_r_mode(&self, r_mode: RMode) -> Result<Self> {
        let fresh = Self::new(self.seed, self.n_paths, self.grid.clone(), self.n_dims, r_mode)?;
        Ok(Self { r: fresh.r, ..self.clone() })
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn quadrature(&self) -> Option<(&[S], &[S])> {
        match &self.r {
            RValues::Quadrature { nodes, weights } => Some((nodes, weights)),
            RValues::Sampled(_) => None,
        }
    }

    pub fn sampled_r(&self, path: usize) -> Option<S> {
        match &self.r {
            RValues::Sampled(v) => v.get(path).copied(),
            RValues::Quadrature { .. } => None,
        }
    }

    /// Increments of path `p`, row-major `[step][dim]`, each with variance `Δt_k`.
    pub fn dw(&self, path: usize) -> Vec<S> {
        let n = self.grid.n_steps;
        let d = self.n_dims;
        let m = self.refinement;
        let root_steps = n / m;
        let (stream, sign) = if self.antithetic { ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 }) } else { (path as u64, 1.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mut root = vec![0.0f64; root_steps * d];
        for k in 0..root_steps {
            let h = (self.grid.t[(k + 1) * m] - self.grid.t[k * m]).as_f64();
            let sd = h.sqrt();
            for v in &mut root[k * d..(k + 1) * d] {
                let z: f64 = rng.sample(StandardNormal);
                *v = sign * sd * z;
            }
        }
        let fine = if m == 1 {
            root
        } else if m.is_power_of_two() {
            self.dyadic_bridge(root, stream, sign, root_steps)
        } else {
            self.flat_bridge(&root, stream, sign, root_steps)
        };
        let mut out: Vec<S> = fine.into_iter().map(S::of).collect();
        if let Some(z) = self.zero_from {
            for v in out.iter_mut().skip(z.min(n) * d) {
                *v = S::zero();
            }
        }
        out
    }
}

impl<S: Scalar> NoiseBatch<S> {
    /// Halves every increment `log2(m)` times with Brownian-bridge midpoints. Level `j`
    /// uses its own stream, so the path refined by `2^j` is the pairwise aggregate of the
    /// path refined by `2^{j+1}`.
    fn dyadic_bridge(&self, root: Vec<f64>, stream: u64, sign: f64, root_steps: usize) -> Vec<f64> {
        let d = self.n_dims;
        let m = self.refinement;
        let mut cur = root;
        let mut steps = root_steps;
        let mut level = 0u64;
        while steps < root_steps * m {
            level += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ BRIDGE_SALT ^ level.rotate_left(32));
            rng.set_stream(stream);
            let stride = root_steps * m / steps;
            let mut next = vec![0.0f64; 2 * steps * d];
            for k in 0..steps {
                let h = (self.grid.t[(k + 1) * stride] - self.grid.t[k * stride]).as_f64();
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    let total = cur[k * d + j];
                    let first = 0.5 * total + sign * 0.5 * h.sqrt() * z;
                    next[2 * k * d + j] = first;
                    next[(2 * k + 1) * d + j] = total - first;
                }
            }
            cur = next;
            steps *= 2;
        }
        cur
    }

    /// One-shot bridge split for factors that are not powers of two.
    fn flat_bridge(&self, root: &[f64], stream: u64, sign: f64, root_steps: usize) -> Vec<f64> {
        let d = self.n_dims;
        let m = self.refinement;
        let mut out = vec![0.0f64; root_steps * m * d];
        let mut br = ChaCha8Rng::seed_from_u64(self.seed ^ BRIDGE_SALT ^ (m as u64).rotate_left(32));
        br.set_stream(stream);
        let mut piece = vec![0.0f64; m];
        for k in 0..root_steps {
            for j in 0..d {
                let mut sum = 0.0;
                for (q, p) in piece.iter_mut().enumerate() {
                    let h = (self.grid.t[k * m + q + 1] - self.grid.t[k * m + q]).as_f64();
                    let z: f64 = br.sample(StandardNormal);
                    *p = sign * h.sqrt() * z;
                    sum += *p;
                }
                let shift = (root[k * d + j] - sum) / m as f64;
                for (q, p) in piece.iter().enumerate() {
                    out[(k * m + q) * d + j] = p + shift;
                }
            }
        }
        out
    }
}
