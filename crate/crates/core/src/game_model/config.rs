//! Structured config for LQ graph games (TOML for humans, canonical JSON for programs).
//!
//! ```toml
//! [game]
//! n_players = 2
//! horizon = 1.0
//! gamma = [1.0, 1.0]
//! d = [0.0, 0.0]
//! x0 = [0.0, 0.0]
//! drift = 0.0                              # number, descriptor, or per-player list
//! vol = { kind = "constant", value = 1.0 }
//! control_bound = 100.0                    # optional
//!
//! [game.weights]
//! mode = "regime"
//! regime = { kind = "exponential", w = [1.0, 2.0] }
//! ```

use serde::{Deserialize, Serialize};

use super::coefficient::Coefficient;
use super::lq::LqGameSpec;
use super::regime::{make_regime_weights, Regime};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Used when a config omits `control_bound`; large enough never to bind in practice.
pub const DEFAULT_CONTROL_BOUND: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub game: GameSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub n_players: usize,
    pub horizon: f64,
    pub weights: WeightsSection,
    pub gamma: Vec<f64>,
    pub d: Vec<f64>,
    pub x0: Vec<f64>,
    pub drift: CoefficientSpec,
    pub vol: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsSection {
    Matrix { matrix: Vec<Vec<f64>> },
    Regime { regime: Regime },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Number(f64),
    Single(Coefficient),
    PerPlayer(Vec<Coefficient>),
}

impl CoefficientSpec {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<Coefficient>> {
        match self {
            CoefficientSpec::Number(v) => Ok(vec![Coefficient::constant(*v); n]),
            CoefficientSpec::Single(c) => Ok(vec![c.clone(); n]),
            CoefficientSpec::PerPlayer(list) if list.len() == n => Ok(list.clone()),
            CoefficientSpec::PerPlayer(list) => Err(Error::Invariant(format!(
                "{path}: expected {n} per-player descriptors, got {}",
                list.len()
            ))),
        }
    }
}

/// Parses TOML, or JSON when the text starts with `{`, into a validated spec.
pub fn parse_game_spec<S: Scalar>(config_text: &str) -> Result<LqGameSpec<S>> {
    spec_from_config(&parse_config_file(config_text)?)
}

pub fn parse_config_file(config_text: &str) -> Result<ConfigFile> {
    if config_text.trim_start().starts_with('{') {
        let de = &mut serde_json::Deserializer::from_str(config_text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    } else {
        let de = toml::Deserializer::parse(config_text).map_err(|e| Error::Schema {
            path: ".".into(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })
    }
}

pub fn spec_from_config<S: Scalar>(cfg: &ConfigFile) -> Result<LqGameSpec<S>> {
    let g = &cfg.game;
    let n = g.n_players;
    if n == 0 {
        return Err(Error::Invariant("game.n_players must be positive".into()));
    }
    let q: Mat<S> = match &g.weights {
        WeightsSection::Matrix { matrix } => {
            let rows: Vec<Vec<S>> = matrix.iter().map(|r| r.iter().map(|&v| S::of(v)).collect()).collect();
            let q = Mat::from_rows(&rows)
                .ok_or_else(|| Error::Invariant("game.weights.matrix: rows have unequal length".into()))?;
            if q.rows() != n || q.cols() != n {
                return Err(Error::Invariant(format!(
                    "game.weights.matrix: expected {n}x{n}, got {}x{}",
                    q.rows(),
                    q.cols()
                )));
            }
            q
        }
        WeightsSection::Regime { regime } => make_regime_weights(regime, n)?,
    };
    let cast = |v: &[f64]| v.iter().map(|&x| S::of(x)).collect::<Vec<S>>();
    LqGameSpec::new(
        S::of(g.horizon),
        q,
        cast(&g.gamma),
        cast(&g.d),
        g.drift.expand(n, "game.drift")?,
        g.vol.expand(n, "game.vol")?,
        cast(&g.x0),
        S::of(g.control_bound.unwrap_or(DEFAULT_CONTROL_BOUND)),
    )
}

/// Explicit-matrix, per-player form of a spec.
pub fn config_from_spec<S: Scalar>(spec: &LqGameSpec<S>) -> ConfigFile {
    let f = |v: &[S]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    ConfigFile {
        game: GameSection {
            n_players: spec.n_players,
            horizon: spec.horizon.as_f64(),
            weights: WeightsSection::Matrix { matrix: spec.q.to_rows().iter().map(|r| f(r)).collect() },
            gamma: f(&spec.gamma),
            d: f(&spec.d),
            x0: f(&spec.x0),
            drift: CoefficientSpec::PerPlayer(spec.a_fn.clone()),
            vol: CoefficientSpec::PerPlayer(spec.sigma_fn.clone()),
            control_bound: Some(spec.control_bound.as_f64()),
        },
    }
}

pub fn to_canonical_json<S: Scalar>(spec: &LqGameSpec<S>) -> String {
    serde_json::to_string_pretty(&config_from_spec(spec)).expect("config serializes")
}
