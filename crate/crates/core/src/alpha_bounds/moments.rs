//! Moment-bound constants for the state `X`, the first-order sensitivity `Y`, and
//! the structural factor of the second-order sensitivity `Z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::DriftBounds;

/// Gronwall exponent constant `c_p = max(2p − 1 + p + p(p−1)/2, p)`.
///
/// The per-player moment inequality has growth rate
/// `L_b(2p−1) + L_b_y p + p(p−1)/2 ≤ c_p (L_b + L_b_y + 1)`.
pub fn c_p(p: f64) -> f64 {
    (2.0 * p - 1.0 + p + p * (p - 1.0) / 2.0).max(p)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("moment order p = {p} must be at least 2")));
    }
    Ok(())
}

/// Per-player data entering the state moment bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentInputs {
    pub horizon: f64,
    /// Initial states `x_k`.
    pub x: Vec<f64>,
    /// `‖σ_k‖_{L^p}` over `[0, T]`.
    pub sigma_lp: Vec<f64>,
    /// `‖u_k‖_{H^p} = (E ∫ |u_k|^p dt)^{1/p}`.
    pub u_hp: Vec<f64>,
}

impl MomentInputs {
    fn term(&self, k: usize, p: f64, l_b: f64) -> f64 {
        self.x[k].abs().powf(p) + (p - 1.0) * self.sigma_lp[k].powf(p) + l_b * self.horizon + self.u_hp[k].powf(p)
    }
}

/// `C_X^{i,p} = (a_i + (L_b_y/N) Σ_k a_k) e^{c_p (L_b + L_b_y + 1) T}` with
/// `a_k = |x_k|^p + (p−1)‖σ_k‖^p_{L^p} + L_b T + ‖u_k‖^p_{H^p}`.
pub fn moment_bound_x(drift: &DriftBounds, data: &MomentInputs, i: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    drift.validate()?;
    let n = data.x.len();
    if data.sigma_lp.len() != n || data.u_hp.len() != n || i >= n {
        return Err(Error::Dimension(format!("moment inputs for {n} players, player index {i}")));
    }
    let own = data.term(i, p, drift.l_b);
    let coupled: f64 = (0..n).map(|k| data.term(k, p, drift.l_b)).sum::<f64>() * drift.l_b_y / n as f64;
    Ok((own + coupled) * (c_p(p) * (drift.l_b + drift.l_b_y + 1.0) * data.horizon).exp())
}

/// `(δ_{h,i} C_Y + (L_b_y/N)^p C̄_Y) ‖u'_h‖^p` with `C_Y = (2T)^{p−1} e^{p L_b T}` and
/// `C̄_Y = (2T)^{2p−1} e^{p(L_b + L_b_y)T} e^{p L_b T}`.
pub fn moment_bound_y(drift: &DriftBounds, horizon: f64, p: f64, n: usize, is_own: bool, u_norm: f64) -> Result<f64> {
    check_p(p)?;
    drift.validate()?;
    let t = horizon;
    let c_y = (2.0 * t).powf(p - 1.0) * (p * drift.l_b * t).exp();
    let c_bar = (2.0 * t).powf(2.0 * p - 1.0) * (p * (drift.l_b + drift.l_b_y) * t).exp() * (p * drift.l_b * t).exp();
    let delta = if is_own { 1.0 } else { 0.0 };
    Ok((delta * c_y + (drift.l_b_y / n as f64).powf(p) * c_bar) * u_norm.powf(p))
}

/// Structural factor `L_b_y² ((δ_{h,i} + δ_{ℓ,i})/N² + 1/N⁴) ‖u'_h‖²_{H⁴} ‖u''_ℓ‖²_{H⁴}` of the
/// second-order sensitivity bound; the envelope constant is left to the caller.
pub fn moment_bound_z_shape(
    drift: &DriftBounds,
    n: usize,
    (h, l, i): (usize, usize, usize),
    (u_h_h4, u_l_h4): (f64, f64),
) -> Result<f64> {
    if h == l {
        return Err(Error::InvalidArgument(format!("second-order sensitivity needs distinct players, got h = l = {h}")));
    }
    drift.validate()?;
    let nf = n as f64;
    let deltas = (h == i) as u8 + (l == i) as u8;
    Ok(drift.l_b_y.powi(2) * (deltas as f64 / nf.powi(2) + 1.0 / nf.powi(4)) * u_h_h4.powi(2) * u_l_h4.powi(2))
}
