//! Numerical toolkit for α-potential stochastic differential games: game specs,
//! α bounds, Riccati solvers for the LQ graph game, Euler–Maruyama simulation of
//! states and sensitivities, Monte Carlo potential estimates, and statistical
//! checks of the α-potential and ε-Nash properties.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix `f64`.

// Negated float comparisons are deliberate: they send NaN down the rejection path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha_bounds;
pub mod error;
pub mod game_model;
pub mod io;
pub mod linalg;
pub mod ne_verify;
pub mod potential_eval;
pub mod ode_solvers;
pub mod scalar;
pub mod sde_sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mat = linalg::Mat<f64>;
pub type LqGameSpec = game_model::LqGameSpec<f64>;
pub type GeneralGameSpec = game_model::GeneralGameSpec<f64>;
pub type LiftedMatrices = game_model::LiftedMatrices<f64>;
pub type TimeGrid = ode_solvers::TimeGrid<f64>;
pub type RiccatiSolution = ode_solvers::RiccatiSolution<f64>;
pub type NoiseBatch = sde_sim::NoiseBatch<f64>;
pub type StrategyProfile = sde_sim::StrategyProfile<f64>;
pub type PathBundle = sde_sim::PathBundle<f64>;
pub type FeedbackLaw = sde_sim::FeedbackLaw<f64>;
