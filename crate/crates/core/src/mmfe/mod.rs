//! Martingale model of forecast evolution: disturbance schedules, the
//! epsilon array, forecasts and their Markov dynamics.

mod array;
mod chain;
mod forecast;
mod model;
mod schedule;
pub mod trace;

pub use array::{reveal_column, sample_epsilon_array, EpsilonArray};
pub use chain::{
    conditional_forecast_roll, conditional_noise_variance, conditional_top_variance, conditional_weather_step,
    g0_aggregate, post_g0_aggregate, post_reveal_noise, revision_variance, roll_forecast_vector, roll_scalar_in_place,
    ForecastVector, FreshReveal,
};
pub use forecast::{forecast, forecast_scalar, martingale_difference, realized_weather};
pub use model::MmfeModel;
pub use schedule::{DisturbanceSchedule, DEFAULT_TAIL_MASS};
