use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mmfe_core::dp::tree::{compare_information, TreeInstance};
use mmfe_core::energy::{
    csv_header, improvement_from_costs, linspace, solve_bundle, sweep_grid_with, trace_form_cost, write_csv_row,
    CellStatus, MomentMethod,
};
use mmfe_core::lqg::write_matrix_csv;
use mmfe_core::registry::{formulations, moment_methods};
use mmfe_core::sim::simulate_energy_pair;
use mmfe_core::validation::{run_battery, BatteryOptions};
use std::sync::Arc;

use crate::config::{ExperimentConfig, Mode, Panel};
use crate::error::CliError;

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// Stream tag for the scenario-tree instances of `dp-demo`.
const TAG_DP_DEMO: u64 = 3;

/// Runs a resolved configuration, writing the config echo and all artifacts
/// under `output_path`.
pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = cfg.output_path.as_path();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(EFFECTIVE_CONFIG), cfg.to_toml())?;
    match cfg.mode {
        Mode::Solve => solve(cfg, out),
        Mode::Sweep => sweep(cfg, out),
        Mode::Simulate => simulate(cfg, out),
        Mode::Validate => validate(cfg, out),
        Mode::DpDemo => dp_demo(cfg, out),
    }
}

fn moments(cfg: &ExperimentConfig) -> Result<Arc<dyn MomentMethod>, CliError> {
    Ok(moment_methods(&cfg.solver.lyapunov)?.get(&cfg.solver.moments)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = moments(cfg)?;
    let registry = formulations();
    let mut costs = Vec::new();
    let mut summary = create(&out.join("solve.csv"))?;
    writeln!(summary, "quantity,value")?;
    for name in ["no-forecast", "dynamic-forecast"] {
        let bundle = registry.get(name)?.build(&cfg.params, m.as_ref())?;
        let sol = solve_bundle(&bundle)?;
        let cost = trace_form_cost(&bundle, &sol);
        let stem = name.replace('-', "_");
        let mut f = create(&out.join(format!("k_{stem}.csv")))?;
        write_matrix_csv(&mut f, &sol.k_matrix)?;
        f.flush()?;
        println!("[{name}] states = {}", bundle.labels.join(", "));
        println!("[{name}] K ={:.6}", sol.k_matrix);
        println!("[{name}] gain ={:.6}", sol.gain);
        println!("[{name}] iterations={} residual={:e} expected_cost={cost:e}", sol.iterations, sol.residual);
        for (j, v) in sol.gain.iter().enumerate() {
            writeln!(summary, "gain_{stem}_{},{v:e}", bundle.labels[j])?;
        }
        writeln!(summary, "cost_{stem},{cost:e}")?;
        costs.push(cost);
    }
    let d = improvement_from_costs(costs[0], costs[1])?;
    writeln!(summary, "D_percent,{d:e}")?;
    summary.flush()?;
    println!("cost_no_forecast={:e} cost_forecast={:e} D_percent={d:e}", costs[0], costs[1]);
    Ok(())
}

fn sweep_file_name(panel: &Panel) -> String {
    format!("sweep_{}_{}.csv", panel.axis1, panel.axis2)
}

fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = moments(cfg)?;
    let mut failed = 0usize;
    for panel in cfg.panels()? {
        let v1 = linspace(panel.range1.0, panel.range1.1, panel.resolution);
        let v2 = linspace(panel.range2.0, panel.range2.1, panel.resolution);
        let total = v1.len() * v2.len();
        let path = out.join(sweep_file_name(&panel));
        let mut f = create(&path)?;
        writeln!(f, "{}", csv_header(panel.axis1, panel.axis2))?;
        let grid = sweep_grid_with(&cfg.params, (panel.axis1, &v1), (panel.axis2, &v2), m.as_ref(), |i, row| {
            for c in row {
                write_csv_row(&mut f, c)?;
            }
            f.flush()?;
            eprintln!("{}x{}: {}/{} cells", panel.axis1, panel.axis2, (i + 1) * v2.len(), total);
            Ok(())
        })?;
        let bad = grid.cells.iter().filter(|c| c.status == CellStatus::NonConvergence).count();
        let other = grid.cells.iter().filter(|c| c.status != CellStatus::Ok).count() - bad;
        failed += bad;
        println!("wrote {} ({} cells, {} not converged, {} invalid or undefined)", path.display(), total, bad, other);
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} sweep cells did not converge")));
    }
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let sim = cfg.sim_config();
    let (cost_nf, cost_f) = mmfe_core::energy::expected_costs_with(&cfg.params, moments(cfg)?.as_ref())?;
    let est = simulate_energy_pair(&cfg.params, &sim)?;
    let rows = [
        ("no_forecast", est.no_forecast, cost_nf),
        ("forecast", est.forecast, cost_f),
        ("difference", est.difference, cost_nf - cost_f),
    ];
    let mut f = create(&out.join("simulate.csv"))?;
    writeln!(f, "system,mean,std_error,replications,truncation_bias_bound,closed_form,z_score")?;
    let mut worst: f64 = 0.0;
    for (name, e, reference) in rows {
        let z = e.z_score(reference);
        worst = worst.max(z.abs());
        writeln!(
            f,
            "{name},{:e},{:e},{},{:e},{reference:e},{z:e}",
            e.mean, e.std_error, e.replications, e.truncation_bias_bound
        )?;
        println!("system={name} {} closed_form={reference:e} z={z:.3}", e.summary());
    }
    f.flush()?;
    if worst > 3.0 {
        return Err(CliError::Validation(format!("simulation disagrees with closed form, |z| = {worst:.3}")));
    }
    Ok(())
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn validate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let opts = BatteryOptions {
        seed: cfg.sim.seed,
        sim_replications: cfg.validate.sim_replications,
        dp_instances: cfg.validate.dp_instances,
    };
    let checks = run_battery(&cfg.params, &opts);
    let mut f = create(&out.join("validate.csv"))?;
    writeln!(f, "check,passed,detail")?;
    for c in &checks {
        writeln!(f, "{},{},{}", c.name, c.passed, csv_quote(&c.detail))?;
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    f.flush()?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(CliError::Validation(format!("failed checks: {}", failed.join(" "))));
    }
    Ok(())
}

fn dp_demo(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let mut f = create(&out.join("dp_demo.csv"))?;
    writeln!(f, "instance,stages,actions,cost_no_forecast,cost_forecast,value_of_forecast,monotone")?;
    println!(
        "{:>8} {:>6} {:>7} {:>14} {:>14} {:>12}",
        "instance", "stages", "actions", "no_forecast", "forecast", "gain"
    );
    let mut violations = 0;
    for i in 0..cfg.dp_demo.instances {
        let mut rng = mmfe_core::rng::stream(cfg.sim.seed, &[TAG_DP_DEMO, i as u64]);
        let inst = TreeInstance::random(&mut rng);
        let c = compare_information(&inst)?;
        let gain = c.cost_no_forecast - c.cost_forecast;
        let monotone = c.cost_forecast <= c.cost_no_forecast + 1e-12 * c.cost_no_forecast.abs().max(1.0);
        violations += usize::from(!monotone);
        writeln!(
            f,
            "{i},{},{},{:e},{:e},{gain:e},{monotone}",
            inst.stages,
            inst.actions.len(),
            c.cost_no_forecast,
            c.cost_forecast
        )?;
        println!(
            "{i:>8} {:>6} {:>7} {:>14.6} {:>14.6} {gain:>12.3e}",
            inst.stages,
            inst.actions.len(),
            c.cost_no_forecast,
            c.cost_forecast
        );
    }
    f.flush()?;
    if violations > 0 {
        return Err(CliError::Validation(format!("{violations} instances where forecasts raised the optimal cost")));
    }
    Ok(())
}
