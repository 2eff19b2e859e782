use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Generator for graph weights with a prescribed asymmetry structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    /// `q_ij = c` for all `i ≠ j`.
    Symmetric { c: f64 },
    /// `q_ij = w_i e^{-|i-j|}`.
    Exponential { w: Vec<f64> },
    /// `q_ij = w_i |i-j|^{-β}`, `β ∈ (0,1)`.
    PowerLaw { w: Vec<f64>, beta: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Symmetric { .. } => "symmetric",
            Regime::Exponential { .. } => "exponential",
            Regime::PowerLaw { .. } => "power_law",
        }
    }

    /// Same regime family resized to `n` players using the bounded default profile
    /// `w_i = 2 + (-1)^i + 0.01 i/N` (1-based `i`): positive, pairwise distinct, and
    /// neighbours differ by about 2 at every `N`.
    pub fn default_for(kind: &str, n: usize) -> Result<Self> {
        let w = default_weights(n);
        match kind {
            "symmetric" => Ok(Regime::Symmetric { c: 1.0 }),
            "exponential" => Ok(Regime::Exponential { w }),
            "power_law" | "power-law" => Ok(Regime::PowerLaw { w, beta: 0.5 }),
            other => Err(Error::InvalidArgument(format!("unknown regime `{other}`"))),
        }
    }
}

pub fn default_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n).map(|i| 2.0 + if i % 2 == 0 { 1.0 } else { -1.0 } + 0.01 * i as f64 / nf).collect()
}

/// Expands a regime descriptor into an `n × n` weight matrix with zero diagonal.
///
/// Repeated `w_i` values are accepted with a logged warning: they make the
/// affected pairs symmetric, which only lowers the asymmetry.
pub fn make_regime_weights<S: Scalar>(regime: &Regime, n: usize) -> Result<Mat<S>> {
    if n == 0 {
        return Err(Error::InvalidArgument("regime weights need n >= 1".into()));
    }
    let check_w = |w: &[f64]| -> Result<()> {
        if w.len() != n {
            return Err(Error::Invariant(format!("regime.w: expected length {n}, got {}", w.len())));
        }
        if let Some(k) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Invariant(format!("regime.w[{k}] must be positive and finite")));
        }
        let mut sorted = w.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            log::warn!("regime.w has repeated entries; affected pairs are symmetric");
        }
        Ok(())
    };
    let q = match regime {
        Regime::Symmetric { c } => {
            if !(*c >= 0.0) || !c.is_finite() {
                return Err(Error::Invariant(format!("regime.c = {c} must be nonnegative")));
            }
            Mat::from_fn(n, n, |i, j| if i == j { S::zero() } else { S::of(*c) })
        }
        Regime::Exponential { w } => {
            check_w(w)?;
            Mat::from_fn(n, n, |i, j| {
                if i == j {
                    S::zero()
                } else {
                    S::of(w[i] * (-(i.abs_diff(j) as f64)).exp())
                }
            })
        }
        Regime::PowerLaw { w, beta } => {
            if !(*beta > 0.0 && *beta < 1.0) {
                return Err(Error::Invariant(format!("regime.beta = {beta} must lie in (0,1)")));
            }
            check_w(w)?;
            Mat::from_fn(n, n, |i, j| {
                if i == j {
                    S::zero()
                } else {
                    S::of(w[i] * (i.abs_diff(j) as f64).powf(-beta))
                }
            })
        }
    };
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_entries() {
        let q: Mat<f64> = make_regime_weights(&Regime::Exponential { w: vec![1.0, 1.5, 2.0] }, 3).unwrap();
        assert!((q[(0, 2)] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((q[(2, 0)] - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(q[(1, 1)], 0.0);
    }

    #[test]
    fn power_law_entries() {
        let q: Mat<f64> = make_regime_weights(&Regime::PowerLaw { w: vec![1.0; 3], beta: 0.5 }, 3).unwrap();
        assert!((q[(0, 2)] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_constant() {
        let q: Mat<f64> = make_regime_weights(&Regime::Symmetric { c: 1.0 }, 2).unwrap();
        assert_eq!(q.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(make_regime_weights::<f64>(&Regime::PowerLaw { w: vec![1.0; 2], beta: 1.0 }, 2).is_err());
        assert!(make_regime_weights::<f64>(&Regime::Exponential { w: vec![1.0, 0.0] }, 2).is_err());
        assert!(make_regime_weights::<f64>(&Regime::Exponential { w: vec![1.0] }, 2).is_err());
    }

    #[test]
    fn default_weights_are_distinct() {
        let w = default_weights(64);
        for i in 0..w.len() {
            for j in 0..i {
                assert_ne!(w[i], w[j]);
            }
        }
    }
}
