//! Closed-form α bounds: the LQ asymmetry bound, the C_V constants assembled over
//! player pairs, moment-bound constants, and log-log decay fits.

mod deriv_bounds;
mod fit;
mod moments;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use deriv_bounds::{
    empirical_pair_bounds, lq_cost_deriv_bounds, lq_pair_bounds, BoundSource, CostDerivBounds, SamplingOptions,
};
pub use fit::{regime_decay_fit, DecayFit};
pub use moments::{c_p, moment_bound_x, moment_bound_y, moment_bound_z_shape, MomentInputs};

use crate::error::{Error, Result};
use crate::game_model::{DriftBounds, LqGameSpec};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// `max_i Σ_{j≠i} |q_ji − q_ij|`.
pub fn asymmetry_index<S: Scalar>(q: &Mat<S>) -> Result<S> {
    if q.rows() != q.cols() {
        return Err(Error::Dimension(format!("weights must be square, got {}x{}", q.rows(), q.cols())));
    }
    let n = q.rows();
    let mut best = S::zero();
    for i in 0..n {
        let row: S = (0..n).filter(|&j| j != i).map(|j| (q[(j, i)] - q[(i, j)]).abs()).sum();
        best = best.max(row);
    }
    Ok(best)
}

/// `C · asymmetry_index(q) / N`.
pub fn lq_alpha_bound<S: Scalar>(spec: &LqGameSpec<S>, envelope_c: S) -> Result<S> {
    check_envelope(envelope_c.as_f64())?;
    Ok(envelope_c * asymmetry_index(&spec.q)? / S::of_usize(spec.n_players))
}

fn check_envelope(c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("envelope constant C = {c} must be nonnegative")));
    }
    Ok(())
}

/// `(C_V1, C_V2, C_V3)` for the ordered pair `(i, j)`.
pub fn cv_constants(b: &CostDerivBounds, i: usize, j: usize, n: usize) -> Result<(f64, f64, f64)> {
    if i == j {
        return Err(Error::InvalidArgument(format!("C_V constants need distinct players, got ({i}, {i})")));
    }
    if i >= n || j >= n || b.n() != n {
        return Err(Error::Dimension(format!("pair ({i}, {j}) with bounds over {} players, n = {n}", b.n())));
    }
    let xx = &b.d2f_xx;
    let xu = &b.d2f_xu;
    let gg = &b.d2g_xx;
    let c1 = xx[(i, j)] + xu[(i, j)] + xu[(j, i)] + b.d2f_uu_ij + gg[(i, j)];

    let mut c2 = 0.0;
    for l in (0..n).filter(|&l| l != j) {
        c2 += xu[(l, i)];
    }
    for h in (0..n).filter(|&h| h != i) {
        c2 += xu[(h, j)];
    }
    for h in [i, j] {
        c2 += b.d1f_x0[h] + b.d1g_x0[h];
        for l in 0..n {
            c2 += xx[(h, l)] + xu[(h, l)] + gg[(h, l)];
        }
    }

    let mut c3 = 0.0;
    let outside = |k: usize| k != i && k != j;
    for h in (0..n).filter(|&h| outside(h)) {
        c3 += b.d1f_x0[h] + b.d1g_x0[h];
        for l in (0..n).filter(|&l| outside(l)) {
            c3 += xx[(h, l)] + xu[(h, l)] + gg[(h, l)];
        }
    }
    Ok((c1, c2, c3))
}

/// Derivative bounds for every ordered pair `(i, j)`, `i ≠ j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairBoundTable {
    pub n: usize,
    pairs: BTreeMap<(usize, usize), CostDerivBounds>,
}

impl PairBoundTable {
    pub fn new(n: usize) -> Self {
        Self { n, pairs: BTreeMap::new() }
    }

    pub fn insert(&mut self, i: usize, j: usize, b: CostDerivBounds) {
        self.pairs.insert((i, j), b);
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&CostDerivBounds> {
        self.pairs.get(&(i, j)).ok_or(Error::MissingPair(i, j))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source(&self) -> Option<BoundSource> {
        self.pairs.values().next().map(|b| b.source)
    }
}

/// Named constants of the general-game α bound.
///
/// `c_v1`, `c_v2`, `c_v3` are summed over `j ≠ i*` for the maximizing player `i*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBoundBreakdown {
    pub c_v1: f64,
    pub c_v2: f64,
    pub c_v3: f64,
    pub n_players: usize,
    pub l_b_y: f64,
    pub structural_prefactor: f64,
    pub envelope_c: f64,
    pub bound: f64,
    /// 1-based index of the player attaining the maximum.
    pub argmax_player: usize,
    pub source: Option<BoundSource>,
}

/// `C · max_i Σ_{j≠i} [C_V1 + L_b_y (C_V2/N + C_V3/N²)]`.
pub fn theorem_alpha_bound(
    table: &PairBoundTable,
    drift: &DriftBounds,
    n: usize,
    envelope_c: f64,
) -> Result<AlphaBoundBreakdown> {
    check_envelope(envelope_c)?;
    drift.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let nf = n as f64;
    let mut best = (f64::NEG_INFINITY, 0usize, (0.0, 0.0, 0.0));
    for i in 0..n {
        let mut sums = (0.0, 0.0, 0.0);
        let mut total = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let (c1, c2, c3) = cv_constants(table.get(i, j)?, i, j, n)?;
            total += c1 + drift.l_b_y * (c2 / nf + c3 / (nf * nf));
            sums.0 += c1;
            sums.1 += c2;
            sums.2 += c3;
        }
        if total > best.0 {
            best = (total, i, sums);
        }
    }
    let prefactor = best.0.max(0.0);
    Ok(AlphaBoundBreakdown {
        c_v1: best.2 .0,
        c_v2: best.2 .1,
        c_v3: best.2 .2,
        n_players: n,
        l_b_y: drift.l_b_y,
        structural_prefactor: prefactor,
        envelope_c,
        bound: envelope_c * prefactor,
        argmax_player: best.1 + 1,
        source: table.source(),
    })
}
