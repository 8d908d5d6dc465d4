//! Named strategy registries: algorithm variants behind a common trait,
//! selected by name from configuration.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::energy::{
    build_dynamic_forecast_with, build_no_forecast_with, ClosedFormMoments, EnergyParams, LyapunovMoments,
    MomentMethod, SystemBundle,
};
use crate::error::{Error, Result};
use crate::lqg::{FixedPointLyapunov, KroneckerLyapunov, LyapunovSolver};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, item: Arc<T>) {
        self.entries.insert(name.to_string(), item);
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            registry: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// A way of casting the control problem as an LQ system.
pub trait ControlFormulation: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: &EnergyParams, moments: &dyn MomentMethod) -> Result<SystemBundle>;
}

pub struct NoForecast;

impl ControlFormulation for NoForecast {
    fn name(&self) -> &'static str {
        "no-forecast"
    }

    fn build(&self, params: &EnergyParams, moments: &dyn MomentMethod) -> Result<SystemBundle> {
        build_no_forecast_with(params, moments)
    }
}

pub struct DynamicForecast;

impl ControlFormulation for DynamicForecast {
    fn name(&self) -> &'static str {
        "dynamic-forecast"
    }

    fn build(&self, params: &EnergyParams, moments: &dyn MomentMethod) -> Result<SystemBundle> {
        build_dynamic_forecast_with(params, moments)
    }
}

pub fn lyapunov_solvers() -> Registry<dyn LyapunovSolver> {
    let mut r: Registry<dyn LyapunovSolver> = Registry::new("lyapunov solver");
    r.register("fixed-point", Arc::new(FixedPointLyapunov::default()));
    r.register("kronecker", Arc::new(KroneckerLyapunov));
    r
}

/// Moment methods; the Lyapunov variant uses `lyapunov` from
/// [`lyapunov_solvers`].
pub fn moment_methods(lyapunov: &str) -> Result<Registry<dyn MomentMethod>> {
    let solver = lyapunov_solvers().get(lyapunov)?;
    let mut r: Registry<dyn MomentMethod> = Registry::new("moment method");
    r.register("closed-form", Arc::new(ClosedFormMoments));
    r.register("lyapunov", Arc::new(LyapunovMoments(solver)));
    Ok(r)
}

pub fn formulations() -> Registry<dyn ControlFormulation> {
    let mut r: Registry<dyn ControlFormulation> = Registry::new("formulation");
    r.register("no-forecast", Arc::new(NoForecast));
    r.register("dynamic-forecast", Arc::new(DynamicForecast));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        assert_eq!(lyapunov_solvers().get("kronecker").unwrap().name(), "kronecker");
        assert_eq!(moment_methods("fixed-point").unwrap().names(), vec!["closed-form", "lyapunov"]);
        let err = formulations().get("static").err().unwrap();
        assert_eq!(err.category(), "unknown_strategy");
        assert!(err.to_string().contains("dynamic-forecast"));
    }

    #[test]
    fn formulations_build_expected_dimensions() {
        let p = EnergyParams::default();
        let f = formulations();
        assert_eq!(f.get("no-forecast").unwrap().build(&p, &ClosedFormMoments).unwrap().lqr.state_dim(), 3);
        assert_eq!(f.get("dynamic-forecast").unwrap().build(&p, &ClosedFormMoments).unwrap().lqr.state_dim(), 5);
    }
}
