use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Time-dependent scalar coefficient `c(t)` (drift rate `a_i` or volatility `σ_i`).
///
/// Coefficients are stored as tagged analytic descriptors so a game config can be
/// serialized and replayed exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    /// `offset + amplitude · sin(frequency · t + phase)`, frequency in rad per unit time.
    Sinusoid { offset: f64, amplitude: f64, frequency: f64, phase: f64 },
    /// Piecewise linear through `(times[k], values[k])`, held constant outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Coefficient {
    pub const fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Affine { intercept, slope } => intercept + slope * t,
            Coefficient::Sinusoid { offset, amplitude, frequency, phase } => {
                offset + amplitude * (frequency * t + phase).sin()
            }
            Coefficient::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    #[inline]
    pub fn eval<S: Scalar>(&self, t: S) -> S {
        match self {
            Coefficient::Constant { value } => S::of(*value),
            _ => S::of(self.eval_f64(t.as_f64())),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Coefficient::Constant { value } => *value == 0.0,
            Coefficient::Affine { intercept, slope } => *intercept == 0.0 && *slope == 0.0,
            Coefficient::Sinusoid { offset, amplitude, .. } => *offset == 0.0 && *amplitude == 0.0,
            Coefficient::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// Largest |c(t)| over a uniform sample of `[0, horizon]`.
    pub fn sup_norm(&self, horizon: f64, samples: usize) -> f64 {
        let samples = samples.max(2);
        (0..samples)
            .map(|k| self.eval_f64(horizon * k as f64 / (samples - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the descriptor is well formed and bounded on `[0, horizon]`.
    pub fn validate(&self, path: &str, horizon: f64) -> Result<()> {
        if let Coefficient::Tabulated { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::Invariant(format!(
                    "{path}: tabulated coefficient needs equal, non-empty times/values"
                )));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invariant(format!("{path}: tabulated times must be strictly increasing")));
            }
        }
        const SAMPLES: usize = 1001;
        for k in 0..SAMPLES {
            let t = horizon * k as f64 / (SAMPLES - 1) as f64;
            if !self.eval_f64(t).is_finite() {
                return Err(Error::Invariant(format!("{path}: not finite at t = {t}")));
            }
        }
        Ok(())
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let last = times.len() - 1;
    if t <= times[0] {
        return values[0];
    }
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&x| x <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let c = Coefficient::Tabulated { times: vec![0.0, 1.0, 2.0], values: vec![0.0, 2.0, 0.0] };
        assert_eq!(c.eval_f64(0.5), 1.0);
        assert_eq!(c.eval_f64(1.5), 1.0);
        assert_eq!(c.eval_f64(-1.0), 0.0);
        assert_eq!(c.eval_f64(5.0), 0.0);
        assert_eq!(c.eval_f64(1.0), 2.0);
    }

    #[test]
    fn sinusoid_and_affine() {
        let s = Coefficient::Sinusoid { offset: 1.0, amplitude: 2.0, frequency: std::f64::consts::PI, phase: 0.0 };
        assert!((s.eval_f64(0.5) - 3.0).abs() < 1e-15);
        let a = Coefficient::Affine { intercept: 1.0, slope: -2.0 };
        assert_eq!(a.eval::<f32>(0.25), 0.5);
    }

    #[test]
    fn unsorted_table_rejected() {
        let c = Coefficient::Tabulated { times: vec![0.0, 0.0], values: vec![1.0, 1.0] };
        assert!(c.validate("game.drift[0]", 1.0).is_err());
    }
}
