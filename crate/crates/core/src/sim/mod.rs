//! Monte Carlo evaluation of linear feedback policies and simulation of
//! joint weather/forecast paths.

mod config;
mod energy;
mod lqr;
mod path;

pub use config::{CostEstimate, SimConfig, DEFAULT_TRUNCATION_TOL};
pub use energy::{simulate_energy_pair, simulate_energy_pair_with, PairedEstimate};
pub use lqr::{simulate_cost_samples, simulate_discounted_cost, GaussianScenario, Scenario};
pub use path::{burn_in, simulate_mmfe_joint_path, simulate_scalar_joint_path};
