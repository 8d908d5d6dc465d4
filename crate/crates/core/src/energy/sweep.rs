use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::{expected_costs_with, improvement_from_costs, EnergyParams, MomentMethod};
use crate::error::{Error, Result};

/// Parameter that a sweep axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Gamma,
    G,
    Rho,
    Sigma2,
    Sigma2V,
    Tau,
    Alpha,
    Kappa,
}

impl Axis {
    pub const ALL: [Axis; 8] =
        [Axis::Gamma, Axis::G, Axis::Rho, Axis::Sigma2, Axis::Sigma2V, Axis::Tau, Axis::Alpha, Axis::Kappa];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::G => "g",
            Axis::Rho => "rho",
            Axis::Sigma2 => "sigma2",
            Axis::Sigma2V => "sigma2_v",
            Axis::Tau => "tau",
            Axis::Alpha => "alpha",
            Axis::Kappa => "kappa",
        }
    }

    pub fn get(self, p: &EnergyParams) -> f64 {
        match self {
            Axis::Gamma => p.gamma,
            Axis::G => p.g,
            Axis::Rho => p.rho,
            Axis::Sigma2 => p.sigma2,
            Axis::Sigma2V => p.sigma2_v,
            Axis::Tau => p.tau,
            Axis::Alpha => p.alpha,
            Axis::Kappa => p.kappa,
        }
    }

    pub fn set(self, p: &mut EnergyParams, v: f64) {
        match self {
            Axis::Gamma => p.gamma = v,
            Axis::G => p.g = v,
            Axis::Rho => p.rho = v,
            Axis::Sigma2 => p.sigma2 = v,
            Axis::Sigma2V => p.sigma2_v = v,
            Axis::Tau => p.tau = v,
            Axis::Alpha => p.alpha = v,
            Axis::Kappa => p.kappa = v,
        }
    }

    /// Default range bracketing the base value.
    pub fn default_range(self, p: &EnergyParams) -> (f64, f64) {
        match self {
            Axis::Gamma => (0.5, 0.99),
            Axis::G => (p.rho + 0.05, 0.95),
            Axis::Rho => (0.05, p.g - 0.05),
            Axis::Sigma2 | Axis::Sigma2V | Axis::Kappa => (0.1, 4.0),
            Axis::Tau => (p.tau0() - 10.0, p.tau0() + 10.0),
            Axis::Alpha => (0.5, 0.98),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::UnknownStrategy {
            registry: "sweep axis",
            name: s.to_string(),
            known: Axis::ALL.map(|a| a.name()).join(", "),
        })
    }
}

/// The four panels of the default figure.
pub const DEFAULT_PANELS: [(Axis, Axis); 4] =
    [(Axis::Gamma, Axis::G), (Axis::Rho, Axis::Alpha), (Axis::Sigma2, Axis::Sigma2V), (Axis::Tau, Axis::Kappa)];

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Invalid,
    NonConvergence,
    UndefinedMetric,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Invalid => "invalid",
            CellStatus::NonConvergence => "nonconvergence",
            CellStatus::UndefinedMetric => "undefined_metric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub v1: f64,
    pub v2: f64,
    pub cost_no_forecast: f64,
    pub cost_forecast: f64,
    pub d_percent: f64,
    pub status: CellStatus,
}

pub fn evaluate_cell(base: &EnergyParams, a1: (Axis, f64), a2: (Axis, f64), moments: &dyn MomentMethod) -> SweepCell {
    let mut p = *base;
    a1.0.set(&mut p, a1.1);
    a2.0.set(&mut p, a2.1);
    let mut cell = SweepCell {
        v1: a1.1,
        v2: a2.1,
        cost_no_forecast: f64::NAN,
        cost_forecast: f64::NAN,
        d_percent: f64::NAN,
        status: CellStatus::Ok,
    };
    if p.validate().is_err() {
        cell.status = CellStatus::Invalid;
        return cell;
    }
    match expected_costs_with(&p, moments) {
        Ok((nf, f)) => {
            cell.cost_no_forecast = nf;
            cell.cost_forecast = f;
            match improvement_from_costs(nf, f) {
                Ok(d) => cell.d_percent = d,
                Err(_) => cell.status = CellStatus::UndefinedMetric,
            }
        }
        Err(Error::NonConvergence { .. }) | Err(Error::Unstable(_)) => cell.status = CellStatus::NonConvergence,
        Err(_) => cell.status = CellStatus::Invalid,
    }
    cell
}

/// Row-major grid of improvement values; row `i` holds `axis1 = values1[i]`.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    pub values1: Vec<f64>,
    pub values2: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.values2.len() + j]
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", csv_header(self.axis1, self.axis2))?;
        for c in &self.cells {
            write_csv_row(out, c)?;
        }
        Ok(())
    }
}

pub fn csv_header(axis1: Axis, axis2: Axis) -> String {
    format!("{axis1},{axis2},cost_no_forecast,cost_forecast,D_percent,status")
}

pub fn write_csv_row<W: Write>(out: &mut W, c: &SweepCell) -> Result<()> {
    writeln!(
        out,
        "{:e},{:e},{:e},{:e},{:e},{}",
        c.v1,
        c.v2,
        c.cost_no_forecast,
        c.cost_forecast,
        c.d_percent,
        c.status.as_str()
    )?;
    Ok(())
}

/// Evaluates one row of the grid in parallel; output order is by cell index.
pub fn sweep_row(
    base: &EnergyParams,
    axis1: (Axis, f64),
    axis2: (Axis, &[f64]),
    moments: &dyn MomentMethod,
) -> Vec<SweepCell> {
    axis2.1.par_iter().map(|&v2| evaluate_cell(base, axis1, (axis2.0, v2), moments)).collect()
}

/// Evaluates the full grid, calling `on_row` as each row completes.
pub fn sweep_grid_with(
    base: &EnergyParams,
    axis1: (Axis, &[f64]),
    axis2: (Axis, &[f64]),
    moments: &dyn MomentMethod,
    mut on_row: impl FnMut(usize, &[SweepCell]) -> Result<()>,
) -> Result<SweepGrid> {
    if axis1.0 == axis2.0 {
        return Err(Error::InvalidParameter(format!("both sweep axes are {}", axis1.0)));
    }
    let mut cells = Vec::with_capacity(axis1.1.len() * axis2.1.len());
    for (i, &v1) in axis1.1.iter().enumerate() {
        let row = sweep_row(base, (axis1.0, v1), axis2, moments);
        on_row(i, &row)?;
        cells.extend(row);
    }
    Ok(SweepGrid { axis1: axis1.0, axis2: axis2.0, values1: axis1.1.to_vec(), values2: axis2.1.to_vec(), cells })
}

pub fn sweep_grid(
    base: &EnergyParams,
    axis1: (Axis, &[f64]),
    axis2: (Axis, &[f64]),
    moments: &dyn MomentMethod,
) -> Result<SweepGrid> {
    sweep_grid_with(base, axis1, axis2, moments, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ClosedFormMoments;

    #[test]
    fn axis_names_round_trip() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("beta".parse::<Axis>().is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.5, 0.99, 25);
        assert_eq!(v.len(), 25);
        assert_eq!(v[0], 0.5);
        assert!((v[24] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn invalid_cells_do_not_stop_the_sweep() {
        let base = EnergyParams::default();
        let grid = sweep_grid(&base, (Axis::Gamma, &[0.9]), (Axis::G, &[0.2, 0.6]), &ClosedFormMoments).unwrap();
        assert_eq!(grid.cell(0, 0).status, CellStatus::Invalid);
        assert!(grid.cell(0, 0).d_percent.is_nan());
        assert_eq!(grid.cell(0, 1).status, CellStatus::Ok);
    }

    #[test]
    fn csv_uses_axis_names() {
        let base = EnergyParams::default();
        let grid = sweep_grid(&base, (Axis::Tau, &[74.0]), (Axis::Kappa, &[1.0]), &ClosedFormMoments).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau,kappa,cost_no_forecast,cost_forecast,D_percent,status\n"));
        assert!(text.trim_end().ends_with(",ok"));
    }
}
