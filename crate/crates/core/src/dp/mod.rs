//! Finite-horizon tabular dynamic programming and discretized forecast
//! recursions.

mod builders;
mod mdp;
mod quantize;
pub mod tree;

pub use builders::{
    discretize_combined, discretize_dynamic_forecast, discretize_no_forecast, discretize_static_forecast, state_index,
    static_stage_distribution, DpGuards, ToyControl,
};
pub use mdp::{
    backward_induction, brute_force_policy_enum, evaluate_policy, Kernel, Row, Solution, Stage, TabularMdp,
    MAX_ENUMERATED_POLICIES,
};
pub use quantize::QuantGrid;
