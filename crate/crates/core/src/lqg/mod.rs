//! Discounted linear-quadratic control: Riccati value iteration, optimal
//! feedback and stationary covariances.

mod lyapunov;
mod riccati;

pub use lyapunov::{lyapunov_stationary_cov, FixedPointLyapunov, KroneckerLyapunov, LyapunovSolver};
pub use riccati::{
    fixed_point_residual, policy_cost_matrix, riccati_solve, write_matrix_csv, DiscountedLqr, RiccatiSolution,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
