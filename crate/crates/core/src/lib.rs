//! Forecast-driven stochastic control: the MMFE forecast model, discounted
//! LQ control, the energy-management example, tabular dynamic programming
//! and Monte Carlo validation.

pub mod dp;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod lqg;
pub mod mmfe;
pub mod registry;
pub mod rng;
pub mod sim;
pub mod validation;

pub use error::{Error, Result};
