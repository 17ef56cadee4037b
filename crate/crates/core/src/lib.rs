//! Forward-start options under continuous-path stochastic volatility.
//!
//! * [`blackscholes`]: closed-form call analytics and implied volatility.
//! * [`models`]: constant volatility and the extended Stein–Stein family.
//! * [`mc_engine`]: path simulation, direct Monte Carlo pricing and the
//!   Malliavin decomposition pricer.
//! * [`forward_smile`]: forward implied volatility, ATM finite-difference
//!   skew and curvature, convergence studies as the remaining maturity shrinks.
//! * [`asymptotics`]: closed-form short-maturity limits of the ATM forward
//!   level, skew and curvature, and their comparison with the simulated smile.

pub mod asymptotics;
pub mod blackscholes;
mod contract;
pub mod error;
pub mod forward_smile;
pub mod mc_engine;
pub mod models;
pub mod rng;
pub mod stats;

pub use contract::ContractSpec;
pub use error::{Error, Result};
pub use stats::McEstimate;
