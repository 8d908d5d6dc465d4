use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sparse probability row: `(next state, probability)` pairs.
pub type Row = Vec<(usize, f64)>;

const ROW_TOL: f64 = 1e-12;

/// Transition probabilities from one stage to the next.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// One row per `(state, action)`, stored at `state * n_actions + action`.
    Sparse { n_from: usize, n_to: usize, n_actions: usize, rows: Vec<Row> },
    /// Controlled coordinate `x` and exogenous coordinate `w` moving
    /// independently; state index is `x * n_w + w` on both sides.
    Product {
        n_x: usize,
        n_w: usize,
        n_x_next: usize,
        n_w_next: usize,
        n_actions: usize,
        /// Indexed by `x * n_actions + action`.
        control: Vec<Row>,
        /// Indexed by `w`.
        exogenous: Vec<Row>,
    },
}

fn check_row(row: &Row, n_to: usize, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &(j, p) in row {
        if j >= n_to {
            return Err(Error::MalformedKernel(format!("{what}: target {j} out of range {n_to}")));
        }
        if !(p >= 0.0) {
            return Err(Error::MalformedKernel(format!("{what}: negative or NaN probability {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::MalformedKernel(format!("{what}: row sums to {sum:.17}")));
    }
    Ok(())
}

impl Kernel {
    pub fn n_from(&self) -> usize {
        match self {
            Kernel::Sparse { n_from, .. } => *n_from,
            Kernel::Product { n_x, n_w, .. } => n_x * n_w,
        }
    }

    pub fn n_to(&self) -> usize {
        match self {
            Kernel::Sparse { n_to, .. } => *n_to,
            Kernel::Product { n_x_next, n_w_next, .. } => n_x_next * n_w_next,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Kernel::Sparse { n_actions, .. } | Kernel::Product { n_actions, .. } => *n_actions,
        }
    }

    /// Number of stored probabilities.
    pub fn stored_entries(&self) -> usize {
        match self {
            Kernel::Sparse { rows, .. } => rows.iter().map(Vec::len).sum(),
            Kernel::Product { control, exogenous, .. } => {
                control.iter().map(Vec::len).sum::<usize>() + exogenous.iter().map(Vec::len).sum::<usize>()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Sparse { n_from, n_to, n_actions, rows } => {
                if rows.len() != n_from * n_actions {
                    return Err(Error::MalformedKernel(format!("{} rows for {n_from}x{n_actions}", rows.len())));
                }
                for (i, row) in rows.iter().enumerate() {
                    check_row(row, *n_to, &format!("state {} action {}", i / n_actions, i % n_actions))?;
                }
            }
            Kernel::Product { n_x, n_w, n_x_next, n_w_next, n_actions, control, exogenous } => {
                if control.len() != n_x * n_actions || exogenous.len() != *n_w {
                    return Err(Error::MalformedKernel("product kernel factor sizes".into()));
                }
                for (i, row) in control.iter().enumerate() {
                    check_row(row, *n_x_next, &format!("control x {} action {}", i / n_actions, i % n_actions))?;
                }
                for (w, row) in exogenous.iter().enumerate() {
                    check_row(row, *n_w_next, &format!("exogenous w {w}"))?;
                }
            }
        }
        Ok(())
    }

    /// Dense probabilities over next states for one `(state, action)`.
    pub fn row_dense(&self, s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_to()];
        match self {
            Kernel::Sparse { n_actions, rows, .. } => {
                for &(j, p) in &rows[s * n_actions + a] {
                    out[j] += p;
                }
            }
            Kernel::Product { n_w, n_w_next, n_actions, control, exogenous, .. } => {
                let (x, w) = (s / n_w, s % n_w);
                for &(xn, px) in &control[x * n_actions + a] {
                    for &(wn, pw) in &exogenous[w] {
                        out[xn * n_w_next + wn] += px * pw;
                    }
                }
            }
        }
        out
    }

    /// `sum_{s'} P(s'|s,a) v(s')` for one pair.
    pub fn expectation(&self, s: usize, a: usize, v_next: &[f64]) -> f64 {
        match self {
            Kernel::Sparse { n_actions, rows, .. } => rows[s * n_actions + a].iter().map(|&(j, p)| p * v_next[j]).sum(),
            Kernel::Product { n_w, n_w_next, n_actions, control, exogenous, .. } => {
                let (x, w) = (s / n_w, s % n_w);
                control[x * n_actions + a]
                    .iter()
                    .map(|&(xn, px)| {
                        px * exogenous[w].iter().map(|&(wn, pw)| pw * v_next[xn * n_w_next + wn]).sum::<f64>()
                    })
                    .sum()
            }
        }
    }

    /// Expectations for every `(state, action)`, laid out `s * n_actions + a`.
    pub fn expectations(&self, v_next: &[f64]) -> Vec<f64> {
        match self {
            Kernel::Sparse { rows, .. } => {
                rows.par_iter().map(|row| row.iter().map(|&(j, p)| p * v_next[j]).sum()).collect()
            }
            Kernel::Product { n_x, n_w, n_x_next, n_w_next, n_actions, control, exogenous } => {
                // u[w][x'] = sum_{w'} P(w'|w) v(x', w')
                let u: Vec<Vec<f64>> = exogenous
                    .par_iter()
                    .map(|row| {
                        (0..*n_x_next)
                            .map(|xn| row.iter().map(|&(wn, pw)| pw * v_next[xn * n_w_next + wn]).sum())
                            .collect()
                    })
                    .collect();
                let mut out = vec![0.0; n_x * n_w * n_actions];
                out.par_chunks_mut(n_w * n_actions).enumerate().for_each(|(x, chunk)| {
                    for w in 0..*n_w {
                        for a in 0..*n_actions {
                            chunk[w * n_actions + a] =
                                control[x * n_actions + a].iter().map(|&(xn, px)| px * u[w][xn]).sum();
                        }
                    }
                });
                out
            }
        }
    }
}

/// One decision stage: state labels, expected one-period costs and the
/// kernel into the next stage (absent at the terminal stage).
#[derive(Debug, Clone)]
pub struct Stage {
    pub labels: Arc<Vec<String>>,
    /// Laid out `s * n_actions + a`.
    pub costs: Vec<f64>,
    pub kernel: Option<Arc<Kernel>>,
}

impl Stage {
    pub fn n_states(&self) -> usize {
        self.labels.len()
    }
}

/// Finite-horizon MDP with stage-indexed state sets, costs and kernels.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    actions: Vec<String>,
    stages: Vec<Stage>,
}

impl TabularMdp {
    pub fn new(actions: Vec<String>, stages: Vec<Stage>) -> Result<Self> {
        let na = actions.len();
        if na == 0 || stages.is_empty() {
            return Err(Error::Shape("an MDP needs at least one action and one stage".into()));
        }
        for (i, st) in stages.iter().enumerate() {
            if st.costs.len() != st.n_states() * na {
                return Err(Error::Shape(format!("stage {i}: {} costs for {}x{na}", st.costs.len(), st.n_states())));
            }
            let last = i + 1 == stages.len();
            match (&st.kernel, last) {
                (None, false) => return Err(Error::MalformedKernel(format!("stage {i} has no kernel"))),
                (Some(k), false) => {
                    if k.n_from() != st.n_states() || k.n_to() != stages[i + 1].n_states() || k.n_actions() != na {
                        return Err(Error::MalformedKernel(format!("stage {i} kernel does not fit its stages")));
                    }
                    k.validate()?;
                }
                _ => {}
            }
        }
        Ok(Self { actions, stages })
    }

    /// Builds from dense tables `costs[i][s][a]` and `kernels[i][s][a][s']`.
    pub fn from_dense(n_actions: usize, costs: Vec<Vec<Vec<f64>>>, kernels: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let mut stages = Vec::with_capacity(costs.len());
        for (i, c) in costs.iter().enumerate() {
            let labels = Arc::new((0..c.len()).map(|s| format!("s{s}")).collect());
            let flat: Vec<f64> = c.iter().flat_map(|row| row.iter().copied()).collect();
            let kernel = kernels.get(i).map(|k| {
                let n_to = costs.get(i + 1).map_or(0, Vec::len);
                let rows = k
                    .iter()
                    .flat_map(|per_a| per_a.iter())
                    .map(|p| p.iter().enumerate().filter(|(_, &q)| q != 0.0).map(|(j, &q)| (j, q)).collect())
                    .collect();
                Arc::new(Kernel::Sparse { n_from: c.len(), n_to, n_actions, rows })
            });
            stages.push(Stage { labels, costs: flat, kernel });
        }
        Self::new((0..n_actions).map(|a| format!("a{a}")).collect(), stages)
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn cost(&self, stage: usize, s: usize, a: usize) -> f64 {
        self.stages[stage].costs[s * self.actions.len() + a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// `values[i][s]`.
    pub values: Vec<Vec<f64>>,
    /// `policy[i][s]`: action index.
    pub policy: Vec<Vec<usize>>,
}

impl Solution {
    /// Stage-0 expected cost under an initial distribution.
    pub fn expected_initial_cost(&self, initial: &[(usize, f64)]) -> f64 {
        initial.iter().map(|&(s, p)| p * self.values[0][s]).sum()
    }

    /// `stage,state,value,action` rows with labels.
    pub fn write_csv<W: Write>(&self, mdp: &TabularMdp, out: &mut W) -> Result<()> {
        writeln!(out, "stage,state,value,action")?;
        for (i, st) in mdp.stages().iter().enumerate() {
            for (s, label) in st.labels.iter().enumerate() {
                writeln!(out, "{i},{label},{:e},{}", self.values[i][s], mdp.actions()[self.policy[i][s]])?;
            }
        }
        Ok(())
    }
}

/// `v_i(s) = min_a [c_i(s,a) + sum P_i(s'|s,a) v_{i+1}(s')]`, ties to the
/// smallest action index.
pub fn backward_induction(mdp: &TabularMdp) -> Solution {
    let na = mdp.n_actions();
    let n = mdp.n_stages();
    let mut values = vec![Vec::new(); n];
    let mut policy = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let st = &mdp.stages[i];
        let q: Vec<f64> = match &st.kernel {
            Some(k) if i + 1 < n => {
                let e = k.expectations(&values[i + 1]);
                st.costs.iter().zip(&e).map(|(c, e)| c + e).collect()
            }
            _ => st.costs.clone(),
        };
        let (v, p): (Vec<f64>, Vec<usize>) = q
            .par_chunks(na)
            .map(|row| {
                let mut best = 0;
                for a in 1..na {
                    if row[a] < row[best] {
                        best = a;
                    }
                }
                (row[best], best)
            })
            .unzip();
        values[i] = v;
        policy[i] = p;
    }
    Solution { values, policy }
}

/// Exact values of a fixed deterministic Markov policy.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = mdp.n_stages();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let st = &mdp.stages[i];
        values[i] = (0..st.n_states())
            .map(|s| {
                let a = policy[i][s];
                let mut v = mdp.cost(i, s, a);
                if i + 1 < n {
                    v += st.kernel.as_ref().expect("validated").expectation(s, a, &values[i + 1]);
                }
                v
            })
            .collect();
    }
    values
}

pub const MAX_ENUMERATED_POLICIES: f64 = 1e6;

/// Enumerates every deterministic Markov policy and keeps the one with the
/// smallest total value over all stages and states. An optimal policy
/// minimizes each `v_i(s)` separately, so it also minimizes the total.
pub fn brute_force_policy_enum(mdp: &TabularMdp) -> Result<Solution> {
    let na = mdp.n_actions();
    let decisions: usize = mdp.stages.iter().map(Stage::n_states).sum();
    let count = (na as f64).powi(decisions as i32);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(Error::SizeGuard(format!("{count:e} policies exceed the enumeration limit")));
    }
    let shape: Vec<usize> = mdp.stages.iter().map(Stage::n_states).collect();
    let mut digits = vec![0usize; decisions];
    let unflatten = |digits: &[usize]| {
        let mut out = Vec::with_capacity(shape.len());
        let mut k = 0;
        for &ns in &shape {
            out.push(digits[k..k + ns].to_vec());
            k += ns;
        }
        out
    };
    let mut best: Option<(f64, Vec<Vec<usize>>, Vec<Vec<f64>>)> = None;
    loop {
        let policy = unflatten(&digits);
        let values = evaluate_policy(mdp, &policy);
        let total: f64 = values.iter().flatten().sum();
        if best.as_ref().is_none_or(|(t, _, _)| total < *t) {
            best = Some((total, policy, values));
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == decisions {
                let (_, policy, values) = best.expect("at least one policy");
                return Ok(Solution { values, policy });
            }
            digits[k] += 1;
            if digits[k] < na {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(costs: [[f64; 2]; 2], stages: usize) -> TabularMdp {
        let k = vec![vec![vec![0.5, 0.5], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![0.25, 0.75]]];
        TabularMdp::from_dense(2, vec![costs.iter().map(|r| r.to_vec()).collect(); stages], vec![k; stages - 1])
            .unwrap()
    }

    #[test]
    fn single_stage_is_pointwise_minimum() {
        let sol = backward_induction(&two_state([[3.0, 1.0], [0.5, 2.0]], 1));
        assert_eq!(sol.values[0], vec![1.0, 0.5]);
        assert_eq!(sol.policy[0], vec![1, 0]);
    }

    #[test]
    fn constant_costs_accumulate() {
        let sol = backward_induction(&two_state([[2.0, 2.0], [2.0, 2.0]], 4));
        for i in 0..4 {
            for s in 0..2 {
                assert_eq!(sol.values[i][s], 2.0 * (4 - i) as f64);
                assert_eq!(sol.policy[i][s], 0);
            }
        }
    }

    #[test]
    fn brute_force_agrees() {
        let mdp = two_state([[1.0, 0.3], [0.2, 0.9]], 3);
        let a = backward_induction(&mdp);
        let b = brute_force_policy_enum(&mdp).unwrap();
        for (x, y) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let bad = TabularMdp::from_dense(1, vec![vec![vec![0.0]], vec![vec![0.0]]], vec![vec![vec![vec![0.9]]]]);
        assert!(matches!(bad, Err(Error::MalformedKernel(_))));
        let neg = TabularMdp::from_dense(
            1,
            vec![vec![vec![0.0]], vec![vec![0.0], vec![0.0]]],
            vec![vec![vec![vec![1.5, -0.5]]]],
        );
        assert!(matches!(neg, Err(Error::MalformedKernel(_))));
    }

    #[test]
    fn enumeration_guard() {
        let mdp = TabularMdp::from_dense(4, vec![vec![vec![0.0; 4]; 11]], vec![]).unwrap();
        assert!(matches!(brute_force_policy_enum(&mdp), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn product_kernel_matches_its_dense_rows() {
        let k = Kernel::Product {
            n_x: 2,
            n_w: 2,
            n_x_next: 2,
            n_w_next: 3,
            n_actions: 2,
            control: vec![vec![(0, 1.0)], vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)], vec![(0, 0.2), (1, 0.8)]],
            exogenous: vec![vec![(0, 0.3), (2, 0.7)], vec![(1, 1.0)]],
        };
        k.validate().unwrap();
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let e = k.expectations(&v);
        for s in 0..4 {
            for a in 0..2 {
                let dense: f64 = k.row_dense(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                assert!((e[s * 2 + a] - dense).abs() < 1e-14);
                assert!((k.expectation(s, a, &v) - dense).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn csv_export_lists_every_state() {
        let mdp = two_state([[1.0, 0.3], [0.2, 0.9]], 2);
        let sol = backward_induction(&mdp);
        let mut buf = Vec::new();
        sol.write_csv(&mdp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().starts_with("0,s0,"));
    }
}
