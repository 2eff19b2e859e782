//! Game specifications: the LQ graph game, the general scalar-state form, and the
//! lifted matrices shared by the Riccati and simulation layers.

pub mod coefficient;
pub mod config;
pub mod general;
pub mod lifted;
pub mod lq;
pub mod models;
pub mod regime;
pub mod traits;

pub use coefficient::Coefficient;
pub use config::{config_from_spec, parse_config_file, parse_game_spec, spec_from_config, to_canonical_json, ConfigFile};
pub use general::{DerivativeCheck, DriftBounds, GeneralGameSpec};
pub use lifted::{build_lifted_matrices, LiftedMatrices};
pub use lq::LqGameSpec;
pub use models::{DistributedCost, LinearDrift, MeanFieldCost, MeanFieldTanhDrift};
pub use regime::{default_weights, make_regime_weights, Regime};
pub use traits::{CostModel, DifferentialGame, DriftModel};
