use std::path::{Path, PathBuf};

use mmfe_core::energy::{Axis, EnergyParams};
use mmfe_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Solve,
    Sweep,
    Simulate,
    Validate,
    DpDemo,
}

/// One explicit sweep panel. When `[sweep]` is absent the four default
/// panels are run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: String,
    pub axis2: String,
    pub range1: Option<[f64; 2]>,
    pub range2: Option<[f64; 2]>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub allow_excluding_default: bool,
}

fn default_resolution() -> usize {
    25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub replications: usize,
    /// Derived from the discount factor when absent.
    pub horizon_periods: Option<usize>,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { replications: 100_000, horizon_periods: None, seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Name in the moment-method registry.
    pub moments: String,
    /// Name in the Lyapunov-solver registry.
    pub lyapunov: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { moments: "closed-form".into(), lyapunov: "fixed-point".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub sim_replications: usize,
    pub dp_instances: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { sim_replications: 20_000, dp_instances: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpDemoSection {
    pub instances: usize,
}

impl Default for DpDemoSection {
    fn default() -> Self {
        Self { instances: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub output_path: PathBuf,
    pub params: EnergyParams,
    pub sweep: Option<SweepSection>,
    pub sim: SimSection,
    pub solver: SolverSection,
    pub validate: ValidateSection,
    pub dp_demo: DpDemoSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            output_path: PathBuf::from("out"),
            params: EnergyParams::default(),
            sweep: None,
            sim: SimSection::default(),
            solver: SolverSection::default(),
            validate: ValidateSection::default(),
            dp_demo: DpDemoSection::default(),
        }
    }
}

/// A sweep panel with axes parsed and ranges filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub axis1: Axis,
    pub axis2: Axis,
    pub range1: (f64, f64),
    pub range2: (f64, f64),
    pub resolution: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Fills every derived default so the echo is self-contained, then
    /// checks mode-specific requirements.
    pub fn resolve(mut self, allow_off_default: bool) -> Result<Self, CliError> {
        self.params.validate()?;
        self.params.trunc_lag = Some(self.params.trunc_lag());
        self.sim.horizon_periods.get_or_insert(SimConfig::default_horizon(self.params.alpha));
        self.sim_config().validate()?;
        mmfe_core::registry::moment_methods(&self.solver.lyapunov)?.get(&self.solver.moments)?;
        if let Some(s) = &mut self.sweep {
            let panel = resolve_panel(&self.params, s)?;
            s.range1 = Some([panel.range1.0, panel.range1.1]);
            s.range2 = Some([panel.range2.0, panel.range2.1]);
            if allow_off_default {
                s.allow_excluding_default = true;
            }
        }
        for panel in self.panels()? {
            check_contains_default(&self.params, &panel, self.allows_off_default(allow_off_default))?;
        }
        Ok(self)
    }

    fn allows_off_default(&self, flag: bool) -> bool {
        flag || self.sweep.as_ref().is_some_and(|s| s.allow_excluding_default)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            replications: self.sim.replications,
            horizon_periods: self.sim.horizon_periods.unwrap_or_else(|| SimConfig::default_horizon(self.params.alpha)),
            seed: self.sim.seed,
            discount: self.params.alpha,
        }
    }

    /// Sweep panels to run: the configured one, or the default four.
    pub fn panels(&self) -> Result<Vec<Panel>, CliError> {
        match &self.sweep {
            Some(s) => Ok(vec![resolve_panel(&self.params, s)?]),
            None => Ok(mmfe_core::energy::DEFAULT_PANELS
                .iter()
                .map(|&(a1, a2)| Panel {
                    axis1: a1,
                    axis2: a2,
                    range1: a1.default_range(&self.params),
                    range2: a2.default_range(&self.params),
                    resolution: default_resolution(),
                })
                .collect()),
        }
    }
}

fn resolve_panel(p: &EnergyParams, s: &SweepSection) -> Result<Panel, CliError> {
    let axis1: Axis = s.axis1.parse().map_err(|e: mmfe_core::Error| CliError::Config(e.to_string()))?;
    let axis2: Axis = s.axis2.parse().map_err(|e: mmfe_core::Error| CliError::Config(e.to_string()))?;
    if axis1 == axis2 {
        return Err(CliError::Config(format!("sweep axes must differ, both are {axis1}")));
    }
    if s.resolution < 2 {
        return Err(CliError::Config(format!("sweep resolution {} must be at least 2", s.resolution)));
    }
    let range = |r: Option<[f64; 2]>, a: Axis| -> Result<(f64, f64), CliError> {
        let (lo, hi) = r.map(|[lo, hi]| (lo, hi)).unwrap_or_else(|| a.default_range(p));
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::Config(format!("range for {a} must be finite and increasing, got [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    };
    Ok(Panel {
        axis1,
        axis2,
        range1: range(s.range1, axis1)?,
        range2: range(s.range2, axis2)?,
        resolution: s.resolution,
    })
}

fn check_contains_default(p: &EnergyParams, panel: &Panel, allow: bool) -> Result<(), CliError> {
    if allow {
        return Ok(());
    }
    for (axis, (lo, hi)) in [(panel.axis1, panel.range1), (panel.axis2, panel.range2)] {
        let v = axis.get(p);
        if v < lo || v > hi {
            return Err(CliError::Config(format!(
                "sweep range [{lo}, {hi}] for {axis} excludes the base value {v}; pass --allow-off-default to run it anyway"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn resolved_echo_reparses_to_the_same_config() {
        let text = r#"
mode = "sweep"
[params]
gamma = 0.9
[sweep]
axis1 = "gamma"
axis2 = "g"
resolution = 5
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap().resolve(false).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.clone().resolve(false).unwrap(), cfg);
    }

    #[test]
    fn off_default_sweep_needs_override() {
        let mut cfg = ExperimentConfig {
            sweep: Some(SweepSection {
                axis1: "gamma".into(),
                axis2: "g".into(),
                range1: Some([0.1, 0.5]),
                range2: None,
                resolution: 3,
                allow_excluding_default: false,
            }),
            ..Default::default()
        };
        assert!(matches!(cfg.clone().resolve(false), Err(CliError::Config(_))));
        assert!(cfg.clone().resolve(true).is_ok());
        cfg.sweep.as_mut().unwrap().allow_excluding_default = true;
        assert!(cfg.resolve(false).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[params]\nbeta = 1.0").is_err());
        assert!(ExperimentConfig::from_toml("mode = \"fly\"").is_err());
    }

    #[test]
    fn resolution_below_two_is_rejected() {
        let text = "[sweep]\naxis1 = \"gamma\"\naxis2 = \"g\"\nresolution = 1";
        assert!(ExperimentConfig::from_toml(text).unwrap().resolve(false).is_err());
    }
}
