//! Discretized versions of the no-forecast, static-forecast,
//! dynamic-forecast and combined recursions for a scalar toy system.

use std::sync::Arc;

use super::mdp::{Kernel, Row, Stage, TabularMdp};
use super::quantize::QuantGrid;
use crate::error::{Error, Result};
use crate::mmfe::{g0_aggregate, DisturbanceSchedule, EpsilonArray, MmfeModel};

/// Scalar control layer on top of the weather.
///
/// The indoor temperature is `X = W + U`, where the controlled deviation
/// follows `U' = rho U + a + V`; this is the same law as
/// `X' = rho X + (W' - rho W) + a + V`, written so that the controlled
/// coordinate moves independently of the weather. The stage cost is
/// `E[(X' - tau)²] + kappa a²` over the next-period noise.
#[derive(Debug, Clone)]
pub struct ToyControl {
    pub rho: f64,
    pub kappa: f64,
    pub tau: f64,
    pub sigma2_v: f64,
    pub u_grid: QuantGrid,
    pub actions: Vec<f64>,
}

impl ToyControl {
    /// Expected cost when `W' ~ (mean_w, var_w)`.
    pub fn stage_cost(&self, u: f64, a: f64, mean_w: f64, var_w: f64) -> f64 {
        let m = mean_w + self.rho * u + a - self.tau;
        var_w + m * m + self.sigma2_v + self.kappa * a * a
    }

    fn control_rows(&self) -> Result<Vec<Row>> {
        let sd = self.sigma2_v.sqrt();
        let mut rows = Vec::with_capacity(self.u_grid.len() * self.actions.len());
        for &u in self.u_grid.atoms() {
            for &a in &self.actions {
                rows.push(self.u_grid.checked_probs(self.rho * u + a, sd)?);
            }
        }
        Ok(rows)
    }

    fn action_labels(&self) -> Vec<String> {
        self.actions.iter().map(|a| format!("{a}")).collect()
    }
}

/// Limits on the size of generated tables.
#[derive(Debug, Clone, Copy)]
pub struct DpGuards {
    pub max_states: usize,
    pub max_kernel_entries: usize,
    /// Largest forecast horizon accepted by the combined builder.
    pub combined_r_cap: usize,
}

impl Default for DpGuards {
    fn default() -> Self {
        Self { max_states: 2_000_000, max_kernel_entries: 50_000_000, combined_r_cap: 1 }
    }
}

/// State index of `(u, exogenous)` in the product layout.
pub fn state_index(u_idx: usize, exo_idx: usize, n_exo: usize) -> usize {
    u_idx * n_exo + exo_idx
}

fn scalar_parts(mmfe: &MmfeModel) -> Result<(f64, f64, &DisturbanceSchedule)> {
    let g = mmfe.scalar_g().ok_or_else(|| Error::Shape("tabular builders need scalar weather".into()))?;
    Ok((g, mmfe.mean_z()[0], mmfe.schedule(0)))
}

fn check_actions(control: &ToyControl, stages: usize) -> Result<()> {
    if control.actions.is_empty() || stages == 0 {
        return Err(Error::Shape("need at least one action and one stage".into()));
    }
    Ok(())
}

/// Assembles one product-layout stage.
fn product_stage(
    control: &ToyControl,
    exo_labels: &[String],
    exo_cost: impl Fn(usize) -> (f64, f64),
    kernel: Option<Arc<Kernel>>,
) -> Stage {
    let n_exo = exo_labels.len();
    let na = control.actions.len();
    let mut costs = Vec::with_capacity(control.u_grid.len() * n_exo * na);
    let mut labels = Vec::with_capacity(control.u_grid.len() * n_exo);
    let moments: Vec<(f64, f64)> = (0..n_exo).map(&exo_cost).collect();
    for &u in control.u_grid.atoms() {
        for (e, label) in exo_labels.iter().enumerate() {
            labels.push(format!("u={u};{label}"));
            let (mean_w, var_w) = moments[e];
            for &a in &control.actions {
                costs.push(control.stage_cost(u, a, mean_w, var_w));
            }
        }
    }
    Stage { labels: Arc::new(labels), costs, kernel }
}

fn product_kernel(control: &ToyControl, control_rows: &[Row], exogenous: Vec<Row>, n_exo_next: usize) -> Arc<Kernel> {
    let n = control.u_grid.len();
    Arc::new(Kernel::Product {
        n_x: n,
        n_w: exogenous.len(),
        n_x_next: n,
        n_w_next: n_exo_next,
        n_actions: control.actions.len(),
        control: control_rows.to_vec(),
        exogenous,
    })
}

fn weather_labels(grid: &QuantGrid) -> Vec<String> {
    grid.atoms().iter().map(|w| format!("w={w}")).collect()
}

/// Stationary MDP on `(U, W)` with `W' ~ N(g W + E Z, var Z_0)`.
pub fn discretize_no_forecast(
    mmfe: &MmfeModel,
    stages: usize,
    w_grid: &QuantGrid,
    control: &ToyControl,
) -> Result<TabularMdp> {
    check_actions(control, stages)?;
    let (g, ez, sched) = scalar_parts(mmfe)?;
    let var = sched.innovation_variance();
    let exo =
        w_grid.atoms().iter().map(|&w| w_grid.checked_probs(g * w + ez, var.sqrt())).collect::<Result<Vec<_>>>()?;
    let kernel = product_kernel(control, &control.control_rows()?, exo, w_grid.len());
    let labels = weather_labels(w_grid);
    let cost = |e: usize| (g * w_grid.atoms()[e] + ez, var);
    let template = product_stage(control, &labels, cost, Some(kernel));
    let mut all = vec![template; stages];
    all.last_mut().expect("stages >= 1").kernel = None;
    TabularMdp::new(control.action_labels(), all)
}

/// Shift and variance of `Z_{i+1}(G_0)` beyond `E Z`: the frozen aggregate
/// `sum_{j<=0} eps_{i+1}(j)` and the plume variance.
pub fn static_stage_distribution(mmfe: &MmfeModel, frozen: &EpsilonArray, i: usize) -> Result<(f64, f64)> {
    let (_, _, sched) = scalar_parts(mmfe)?;
    let shift = g0_aggregate(frozen, i as i64 + 1)?[0];
    Ok((shift, sched.plume_variance(i as i64)))
}

/// Non-stationary MDP on `(U, W)` driven by the weather conditioned on the
/// frozen time-0 information.
pub fn discretize_static_forecast(
    mmfe: &MmfeModel,
    frozen: &EpsilonArray,
    stages: usize,
    w_grid: &QuantGrid,
    control: &ToyControl,
) -> Result<TabularMdp> {
    check_actions(control, stages)?;
    let (g, ez, _) = scalar_parts(mmfe)?;
    let control_rows = control.control_rows()?;
    let labels = weather_labels(w_grid);
    let mut all = Vec::with_capacity(stages);
    for i in 0..stages {
        let (shift, var) = static_stage_distribution(mmfe, frozen, i)?;
        let mean = |w: f64| g * w + ez + shift;
        let kernel = if i + 1 < stages {
            let exo = w_grid
                .atoms()
                .iter()
                .map(|&w| w_grid.checked_probs(mean(w), var.sqrt()))
                .collect::<Result<Vec<_>>>()?;
            Some(product_kernel(control, &control_rows, exo, w_grid.len()))
        } else {
            None
        };
        all.push(product_stage(control, &labels, |e| (mean(w_grid.atoms()[e]), var), kernel));
    }
    TabularMdp::new(control.action_labels(), all)
}

/// Multi-index layout of the quantized forecast vector, `f_1` slowest.
struct ForecastLayout<'a> {
    grids: &'a [QuantGrid],
    strides: Vec<usize>,
    size: usize,
}

impl<'a> ForecastLayout<'a> {
    fn new(grids: &'a [QuantGrid]) -> Self {
        let mut strides = vec![1; grids.len()];
        for j in (0..grids.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * grids[j + 1].len();
        }
        let size = grids.iter().map(QuantGrid::len).product();
        Self { grids, strides, size }
    }

    fn values(&self, idx: usize) -> Vec<f64> {
        self.grids.iter().zip(&self.strides).map(|(grid, &st)| grid.atoms()[(idx / st) % grid.len()]).collect()
    }

    fn label(&self, idx: usize) -> String {
        self.values(idx).iter().enumerate().map(|(j, v)| format!("f{}={v}", j + 1)).collect::<Vec<_>>().join(";")
    }
}

/// Quantized law of the next forecast vector given the current one, built
/// coordinate by coordinate from the conditional Gaussians
/// `F'_j | F'_{j-1} ~ N(m_j + g (F'_{j-1} - m_{j-1}), var eps_j)`, where
/// `m_j` is the carried-over forecast. The top coordinate additionally
/// receives `top_shift` in its mean and `agg_var` in its variance.
fn forecast_row(
    layout: &ForecastLayout<'_>,
    f: &[f64],
    g: f64,
    ez: f64,
    sched: &DisturbanceSchedule,
    top_shift: f64,
    agg_var: f64,
) -> Result<Row> {
    let r = f.len();
    let carried = |j: usize| if j < r { f[j] } else { g * f[r - 1] + ez + top_shift };
    // (flat index so far, probability, previous atom)
    let mut partial: Vec<(usize, f64, f64)> = vec![(0, 1.0, f64::NAN)];
    for j in 1..=r {
        let grid = &layout.grids[j - 1];
        let mut var = sched.variance(j as i64);
        if j == 1 {
            var += g * g * sched.variance(0);
        }
        if j == r {
            var += agg_var;
        }
        let mut next = Vec::with_capacity(partial.len() * grid.len());
        for &(idx, p, prev) in &partial {
            let mean = if j == 1 { carried(1) } else { carried(j) + g * (prev - carried(j - 1)) };
            for (k, q) in grid.checked_probs(mean, var.sqrt())? {
                next.push((idx + k * layout.strides[j - 1], p * q, grid.atoms()[k]));
            }
        }
        partial = next;
    }
    Ok(partial.into_iter().map(|(i, p, _)| (i, p)).collect())
}

fn check_size(control: &ToyControl, layout: &ForecastLayout<'_>, guards: &DpGuards) -> Result<()> {
    let states = control.u_grid.len().saturating_mul(layout.size);
    if states > guards.max_states {
        return Err(Error::SizeGuard(format!("{states} states exceed the limit {}", guards.max_states)));
    }
    let entries = layout.size.saturating_mul(layout.size);
    if entries > guards.max_kernel_entries {
        return Err(Error::SizeGuard(format!(
            "forecast kernel with up to {entries} entries exceeds the limit {}",
            guards.max_kernel_entries
        )));
    }
    Ok(())
}

fn forecast_stage(
    mmfe: &MmfeModel,
    grids: &[QuantGrid],
    control: &ToyControl,
    control_rows: &[Row],
    top: Option<(f64, f64)>,
) -> Result<Stage> {
    let (g, ez, sched) = scalar_parts(mmfe)?;
    let layout = ForecastLayout::new(grids);
    let labels: Vec<String> = (0..layout.size).map(|i| layout.label(i)).collect();
    let kernel = match top {
        Some((shift, agg_var)) => {
            let exo = (0..layout.size)
                .map(|i| forecast_row(&layout, &layout.values(i), g, ez, sched, shift, agg_var))
                .collect::<Result<Vec<_>>>()?;
            Some(product_kernel(control, control_rows, exo, layout.size))
        }
        None => None,
    };
    let e0 = sched.variance(0);
    // W' = F_{n+1|n} + eps_{n+1}(n+1)
    let cost = |i: usize| (layout.values(i)[0], e0);
    Ok(product_stage(control, &labels, cost, kernel))
}

fn check_grids(r: usize, grids: &[QuantGrid]) -> Result<()> {
    if r == 0 || grids.len() != r {
        return Err(Error::Shape(format!(
            "need r >= 1 and one grid per forecast coordinate (r={r}, {} grids)",
            grids.len()
        )));
    }
    Ok(())
}

/// Stationary MDP on `(U, F_{n+1|n}, ..., F_{n+r|n})`.
pub fn discretize_dynamic_forecast(
    mmfe: &MmfeModel,
    r: usize,
    stages: usize,
    grids: &[QuantGrid],
    control: &ToyControl,
    guards: &DpGuards,
) -> Result<TabularMdp> {
    check_actions(control, stages)?;
    check_grids(r, grids)?;
    check_size(control, &ForecastLayout::new(grids), guards)?;
    let (_, _, sched) = scalar_parts(mmfe)?;
    let control_rows = control.control_rows()?;
    let top = Some((0.0, sched.tail_variance(r as i64 + 1)));
    let template = forecast_stage(mmfe, grids, control, &control_rows, if stages > 1 { top } else { None })?;
    let mut all = vec![template; stages];
    all.last_mut().expect("stages >= 1").kernel = None;
    TabularMdp::new(control.action_labels(), all)
}

/// Non-stationary MDP on the forecast vector conditioned on the frozen
/// time-0 information: the long-horizon term splits into the frozen
/// aggregate and the entries revealed after time 0.
pub fn discretize_combined(
    mmfe: &MmfeModel,
    frozen: &EpsilonArray,
    r: usize,
    stages: usize,
    grids: &[QuantGrid],
    control: &ToyControl,
    guards: &DpGuards,
) -> Result<TabularMdp> {
    check_actions(control, stages)?;
    check_grids(r, grids)?;
    if r > guards.combined_r_cap {
        return Err(Error::SizeGuard(format!("combined recursion capped at r={}", guards.combined_r_cap)));
    }
    check_size(control, &ForecastLayout::new(grids), guards)?;
    let (_, _, sched) = scalar_parts(mmfe)?;
    let control_rows = control.control_rows()?;
    let mut all = Vec::with_capacity(stages);
    for n in 0..stages {
        let top = if n + 1 < stages {
            let target = (n + 1 + r) as i64;
            let shift = g0_aggregate(frozen, target)?[0];
            let n = n as i64;
            let post0 = if n >= 1 { sched.variance_sum(r as i64 + 1, n + r as i64) } else { 0.0 };
            Some((shift, post0))
        } else {
            None
        };
        all.push(forecast_stage(mmfe, grids, control, &control_rows, top)?);
    }
    TabularMdp::new(control.action_labels(), all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::backward_induction;
    use crate::mmfe::sample_epsilon_array;

    fn toy() -> ToyControl {
        ToyControl {
            rho: 0.3,
            kappa: 1.0,
            tau: 1.0,
            sigma2_v: 0.5,
            u_grid: QuantGrid::uniform(0.0, 3.0, 9).unwrap(),
            actions: vec![-1.0, 0.0, 1.0],
        }
    }

    fn model(gamma: f64) -> MmfeModel {
        MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, gamma, 0.4, 3).unwrap()).unwrap()
    }

    #[test]
    fn no_information_static_kernels_match_the_ar1_kernel() {
        let m = MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.0, 0.4, 1).unwrap()).unwrap();
        let frozen = EpsilonArray::zeros(&m, -1..=0).unwrap();
        let grid = QuantGrid::uniform(1.0, 4.0, 11).unwrap();
        let st = discretize_static_forecast(&m, &frozen, 4, &grid, &toy()).unwrap();
        let nf = discretize_no_forecast(&m, 4, &grid, &toy()).unwrap();
        for i in 0..3 {
            assert_eq!(st.stages()[i].kernel, nf.stages()[i].kernel);
            assert_eq!(st.stages()[i].costs, nf.stages()[i].costs);
        }
    }

    #[test]
    fn static_variance_is_the_plume() {
        let m = model(0.8);
        let frozen = sample_epsilon_array(&m, -3..=0, 5).unwrap();
        for i in 0..6 {
            let (_, var) = static_stage_distribution(&m, &frozen, i).unwrap();
            let expect: f64 = (0..=i.min(3)).map(|j| 0.8f64.powi(2 * j as i32)).sum();
            assert!((var - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn static_shift_uses_only_frozen_entries() {
        let m = model(0.8);
        let frozen = sample_epsilon_array(&m, -3..=0, 5).unwrap();
        let (s1, _) = static_stage_distribution(&m, &frozen, 0).unwrap();
        let direct: f64 = (-2..=0).map(|j| frozen.value(1, j, 0).unwrap()).sum();
        assert!((s1 - direct).abs() < 1e-15);
        // Beyond the lag nothing frozen remains.
        assert_eq!(static_stage_distribution(&m, &frozen, 5).unwrap().0, 0.0);
    }

    #[test]
    fn dynamic_kernels_are_stationary_and_stochastic() {
        let m = model(0.8);
        let grids = vec![QuantGrid::uniform(1.0, 4.0, 13).unwrap(); 2];
        let mdp = discretize_dynamic_forecast(&m, 2, 4, &grids, &toy(), &DpGuards::default()).unwrap();
        let k0 = mdp.stages()[0].kernel.as_ref().unwrap();
        for st in &mdp.stages()[1..3] {
            assert_eq!(**st.kernel.as_ref().unwrap(), **k0);
        }
        k0.validate().unwrap();
    }

    #[test]
    fn no_information_dynamic_matches_no_forecast_through_the_forecast_map() {
        // gamma = 0: F_{n+1|n} = g W_n + E Z carries nothing beyond W_n.
        let m = MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.0, 0.4, 1).unwrap()).unwrap();
        let w_grid = QuantGrid::uniform(1.0, 4.0, 11).unwrap();
        let f_grid = w_grid.affine(0.6, 0.4).unwrap();
        let control = toy();
        let nf = backward_induction(&discretize_no_forecast(&m, 5, &w_grid, &control).unwrap());
        let dy = backward_induction(
            &discretize_dynamic_forecast(&m, 1, 5, &[f_grid], &control, &DpGuards::default()).unwrap(),
        );
        for i in 0..5 {
            for (a, b) in nf.values[i].iter().zip(&dy.values[i]) {
                assert!((a - b).abs() < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn size_guard() {
        let m = model(0.8);
        let grids = vec![QuantGrid::uniform(1.0, 4.0, 15).unwrap(); 2];
        let guards = DpGuards { max_states: 100, ..Default::default() };
        assert!(matches!(discretize_dynamic_forecast(&m, 2, 3, &grids, &toy(), &guards), Err(Error::SizeGuard(_))));
        let frozen = EpsilonArray::zeros(&m, -3..=0).unwrap();
        assert!(matches!(
            discretize_combined(&m, &frozen, 2, 3, &grids, &toy(), &DpGuards::default()),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn combined_with_empty_past_matches_dynamic_at_the_start() {
        // At n = 0 no post-0 entries exist yet, so the first combined kernel
        // only differs from the dynamic one through the frozen aggregate
        // and the smaller top variance.
        let m = model(0.8);
        let frozen = EpsilonArray::zeros(&m, -3..=0).unwrap();
        let grids = vec![QuantGrid::uniform(1.0, 5.0, 11).unwrap()];
        let c = discretize_combined(&m, &frozen, 1, 3, &grids, &toy(), &DpGuards::default()).unwrap();
        for st in &c.stages()[..2] {
            st.kernel.as_ref().unwrap().validate().unwrap();
        }
        assert_ne!(c.stages()[0].kernel, c.stages()[1].kernel);
    }

    #[test]
    fn coarse_grid_is_a_discretization_error() {
        let m = model(0.8);
        let grid = QuantGrid::uniform(1.0, 40.0, 5).unwrap();
        assert!(matches!(discretize_no_forecast(&m, 2, &grid, &toy()), Err(Error::Discretization(_))));
    }
}
