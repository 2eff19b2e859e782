use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Indices of inputs dropped because the value was not positive.
    pub dropped: Vec<usize>,
    pub flagged: bool,
}

/// Least squares fit of `log α = intercept + slope · log N`.
pub fn regime_decay_fit(n_values: &[f64], alpha_values: &[f64]) -> Result<DecayFit> {
    if n_values.len() != alpha_values.len() {
        return Err(Error::Dimension(format!("{} N values vs {} α values", n_values.len(), alpha_values.len())));
    }
    if n_values.len() < 3 {
        return Err(Error::InvalidArgument(format!("decay fit needs at least 3 points, got {}", n_values.len())));
    }
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, (&n, &a)) in n_values.iter().zip(alpha_values).enumerate() {
        if a > 0.0 && a.is_finite() && n > 0.0 {
            xs.push(n.ln());
            ys.push(a.ln());
        } else {
            log::warn!("decay fit: dropping point {k} (N = {n}, α = {a})");
            dropped.push(k);
        }
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("decay fit: fewer than 2 positive points remain".into()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("decay fit: all N values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { slope, intercept, r_squared, n_points: xs.len(), flagged: !dropped.is_empty(), dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let ns = [4.0, 8.0, 16.0];
        let f = regime_decay_fit(&ns, &ns.map(|n| 1.0 / n)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = regime_decay_fit(&ns, &ns.map(|n: f64| n.powf(-0.5))).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_point_is_dropped_and_flagged() {
        let f = regime_decay_fit(&[2.0, 4.0, 8.0, 16.0], &[0.5, 0.0, 0.125, 0.0625]).unwrap();
        assert!(f.flagged);
        assert_eq!(f.dropped, vec![1]);
        assert!((f.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(regime_decay_fit(&[1.0, 2.0], &[1.0, 0.5]).is_err());
    }
}
