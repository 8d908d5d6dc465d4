//! Exact comparison of the no-forecast and forecast-informed controllers on
//! a finite scenario tree.
//!
//! The weather has truncation lag 1 with two-point disturbances: at time
//! `n` the forecaster learns `eps_n(n) = ±s0` and `eps_{n+1}(n) = ±s1`. A
//! controller seeing only the weather faces `W' = g W + E Z ± s1 ± s0`; one
//! seeing the forecast `F = F_{n+1|n}` faces `W' = F ± s0` and
//! `F' = g W' + E Z ± s1`. Both MDPs are enumerated exactly over the
//! reachable values, so the forecast-informed optimal cost can never exceed
//! the other.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::mdp::{backward_induction, Kernel, Row, Stage, TabularMdp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeInstance {
    pub g: f64,
    pub mean_z: f64,
    pub s0: f64,
    pub s1: f64,
    pub rho: f64,
    pub kappa: f64,
    pub tau: f64,
    pub sv: f64,
    pub w0: f64,
    pub u0: f64,
    pub actions: Vec<f64>,
    pub stages: usize,
}

impl TreeInstance {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n_actions = rng.random_range(2..=3);
        Self {
            g: rng.random_range(0.1..0.95),
            mean_z: rng.random_range(-1.0..1.0),
            s0: rng.random_range(0.1..1.5),
            s1: rng.random_range(0.1..1.5),
            rho: rng.random_range(0.05..0.9),
            kappa: rng.random_range(0.05..2.0),
            tau: rng.random_range(-2.0..2.0),
            sv: rng.random_range(0.0..1.0),
            w0: rng.random_range(-2.0..2.0),
            u0: rng.random_range(-1.0..1.0),
            actions: (0..n_actions).map(|_| rng.random_range(-2.0..2.0)).collect(),
            stages: rng.random_range(2..=4),
        }
    }

    fn cost(&self, u: f64, a: f64, mean_w: f64, var_w: f64) -> f64 {
        let m = mean_w + self.rho * u + a - self.tau;
        var_w + m * m + self.sv * self.sv + self.kappa * a * a
    }
}

/// Reachable values of one coordinate at one stage.
#[derive(Default)]
struct ValueSet {
    values: Vec<f64>,
    index: BTreeMap<i64, usize>,
}

impl ValueSet {
    fn insert(&mut self, x: f64) -> usize {
        // Paths that reach the same value in different orders differ only
        // by rounding.
        let key = (x * 1e9).round() as i64;
        *self.index.entry(key).or_insert_with(|| {
            self.values.push(x);
            self.values.len() - 1
        })
    }
}

/// One step of a coordinate: value -> list of (next value, probability).
fn expand(
    sets: &mut Vec<ValueSet>,
    stages: usize,
    init: &[f64],
    step: impl Fn(f64) -> Vec<(f64, f64)>,
) -> Vec<Vec<Row>> {
    let mut first = ValueSet::default();
    for &x in init {
        first.insert(x);
    }
    sets.push(first);
    let mut rows = Vec::new();
    for i in 0..stages.saturating_sub(1) {
        let mut next = ValueSet::default();
        let stage_rows: Vec<Row> =
            sets[i].values.iter().map(|&x| step(x).into_iter().map(|(y, p)| (next.insert(y), p)).collect()).collect();
        rows.push(stage_rows);
        sets.push(next);
    }
    rows
}

fn merge(row: Row) -> Row {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, p) in row {
        *m.entry(j).or_default() += p;
    }
    m.into_iter().collect()
}

fn build(
    inst: &TreeInstance,
    exo_init: &[f64],
    exo_step: impl Fn(f64) -> Vec<(f64, f64)>,
    moments: impl Fn(f64) -> (f64, f64),
) -> Result<(TabularMdp, ValueSet)> {
    let na = inst.actions.len();
    let mut u_sets = Vec::new();
    let actions = inst.actions.clone();
    let (rho, sv) = (inst.rho, inst.sv);
    // The control coordinate branches on the action too, so expand it over
    // every action and record rows per (u, a).
    u_sets.push({
        let mut s = ValueSet::default();
        s.insert(inst.u0);
        s
    });
    let mut u_rows: Vec<Vec<Row>> = Vec::new();
    for i in 0..inst.stages.saturating_sub(1) {
        let mut next = ValueSet::default();
        let mut rows = Vec::new();
        for &u in &u_sets[i].values {
            for &a in &actions {
                let row = vec![(next.insert(rho * u + a + sv), 0.5), (next.insert(rho * u + a - sv), 0.5)];
                rows.push(merge(row));
            }
        }
        u_rows.push(rows);
        u_sets.push(next);
    }
    let mut w_sets = Vec::new();
    let w_rows = expand(&mut w_sets, inst.stages, exo_init, exo_step);
    let mut stages = Vec::with_capacity(inst.stages);
    for i in 0..inst.stages {
        let (us, ws) = (&u_sets[i].values, &w_sets[i].values);
        let mut labels = Vec::with_capacity(us.len() * ws.len());
        let mut costs = Vec::with_capacity(us.len() * ws.len() * na);
        for &u in us {
            for &w in ws {
                labels.push(format!("u={u};s={w}"));
                let (mean, var) = moments(w);
                for &a in &actions {
                    costs.push(inst.cost(u, a, mean, var));
                }
            }
        }
        let kernel = (i + 1 < inst.stages).then(|| {
            Arc::new(Kernel::Product {
                n_x: us.len(),
                n_w: ws.len(),
                n_x_next: u_sets[i + 1].values.len(),
                n_w_next: w_sets[i + 1].values.len(),
                n_actions: na,
                control: u_rows[i].clone(),
                exogenous: w_rows[i].iter().cloned().map(merge).collect(),
            })
        });
        stages.push(Stage { labels: Arc::new(labels), costs, kernel });
    }
    let mdp = TabularMdp::new(actions.iter().map(|a| format!("{a}")).collect(), stages)?;
    Ok((mdp, w_sets.swap_remove(0)))
}

/// Optimal expected costs of both controllers from `(u0, w0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeComparison {
    pub cost_no_forecast: f64,
    pub cost_forecast: f64,
}

pub fn compare_information(inst: &TreeInstance) -> Result<TreeComparison> {
    if inst.actions.is_empty() || inst.stages == 0 {
        return Err(Error::Shape("scenario tree needs actions and stages".into()));
    }
    let (g, ez, s0, s1) = (inst.g, inst.mean_z, inst.s0, inst.s1);
    let var_nf = s0 * s0 + s1 * s1;
    let (nf, _) = build(
        inst,
        &[inst.w0],
        |w| {
            let m = g * w + ez;
            vec![(m + s1 + s0, 0.25), (m + s1 - s0, 0.25), (m - s1 + s0, 0.25), (m - s1 - s0, 0.25)]
        },
        |w| (g * w + ez, var_nf),
    )?;
    let f0 = g * inst.w0 + ez;
    let (fc, mut f_init) = build(
        inst,
        &[f0 + s1, f0 - s1],
        |f| {
            let mut out = Vec::with_capacity(4);
            for e0 in [s0, -s0] {
                let m = g * (f + e0) + ez;
                out.push((m + s1, 0.25));
                out.push((m - s1, 0.25));
            }
            out
        },
        |f| (f, s0 * s0),
    )?;
    let v_nf = backward_induction(&nf);
    let v_f = backward_induction(&fc);
    // Stage 0 has the single control value u0, so states are the exogenous values.
    let cost_forecast = 0.5 * v_f.values[0][f_init.insert(f0 + s1)] + 0.5 * v_f.values[0][f_init.insert(f0 - s1)];
    Ok(TreeComparison { cost_no_forecast: v_nf.values[0][0], cost_forecast })
}
