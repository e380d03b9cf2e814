//! Uplink NOMA subchannel assignment: an exact dual-decomposition solver,
//! an exhaustive oracle, and a stacked feed-forward surrogate that learns the
//! solver's assignments.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix it to `f64`, which is what the command-line tool uses.

pub mod cli;
pub mod dims;
pub mod error;
pub mod matrix;
pub mod num;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod surrogate;

pub use dims::Dims;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use num::Real;

pub type Scenario64 = scenario::Scenario<f64>;
pub type EffectiveGains64 = scenario::EffectiveGainMatrix<f64>;
pub type Dataset64 = scenario::Dataset<f64>;
pub type Instance64 = solver::Instance<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SolveResult64 = solver::SolveResult<f64>;
pub type Mlp64 = surrogate::MlpModel<f64>;
pub type Mlp32 = surrogate::MlpModel<f32>;
pub type Ensemble64 = surrogate::EnsembleModel<f64>;
