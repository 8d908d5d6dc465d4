//! Building-temperature control with and without dynamic weather forecasts.

mod cost;
mod params;
mod sweep;
mod systems;

pub use cost::{
    expected_cost_forecast, expected_cost_no_forecast, expected_costs_with, forecast_cost_expansion, improvement_d,
    improvement_from_costs, no_forecast_cost_expansion, solve_bundle, trace_form_cost,
};
pub use params::EnergyParams;
pub use sweep::{
    csv_header, evaluate_cell, linspace, sweep_grid, sweep_grid_with, sweep_row, write_csv_row, Axis, CellStatus,
    SweepCell, SweepGrid, DEFAULT_PANELS,
};
pub use systems::{
    build_dynamic_forecast, build_dynamic_forecast_with, build_no_forecast, build_no_forecast_with, forecast_noise_cov,
    no_forecast_noise_cov, ClosedFormMoments, LyapunovMoments, MomentMethod, SystemBundle, FORECAST_LABELS,
    NO_FORECAST_LABELS,
};
