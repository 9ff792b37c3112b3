//! Subcommand dispatch: solve / benchmark / simulate / verify / envelopes.

pub mod config;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};

use crate::envelopes;
use crate::model::{ModelError, SupNorms, DEFAULT_RATIO_CAP};
use crate::odebench::{self, OdeError};
use crate::pdesolver::{self, PdeError, ValueSurface};
use crate::simulator::{
    derive_seed, monte_carlo, simulate_policy, Perturbation, PolicyValue, SimError,
    STREAM_BROWNIAN, STREAM_POISSON,
};
use crate::verify::{run_battery, BatteryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Benchmark,
    Simulate,
    Verify,
    Envelopes,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Envelope(#[from] envelopes::EnvelopeError),
    #[error(transparent)]
    Csv(#[from] output::CsvError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 = configuration / usage problem, 3 = numerical or io failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Model(_) => 2,
            RunError::Ode(OdeError::NotSeparable(_)) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    /// 0 when every invoked check passed, 1 otherwise.
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn solve_surface(cfg: &RunConfig) -> Result<(SupNorms, ValueSurface), RunError> {
    let norms = cfg.model.estimate_sup_norms(cfg.y_min, cfg.y_max, cfg.norm_samples, DEFAULT_RATIO_CAP)?;
    let grid = pdesolver::build_grid(
        cfg.y_min,
        cfg.y_max,
        cfg.n_y,
        cfg.model.horizon,
        cfg.eps,
        cfg.n_t,
        cfg.grading,
    )?;
    let surface = pdesolver::solve(&cfg.model, &norms, &grid, cfg.layer_mode)?;
    Ok((norms, surface))
}

pub fn run(sub: Subcommand, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outcome = RunOutcome { exit_code: 0, artifacts: Vec::new(), summary: Vec::new() };

    match sub {
        Subcommand::Solve => {
            let (norms, surface) = solve_surface(cfg)?;
            let surface_path = cfg.out_dir.join("surface.csv");
            output::write_surface_csv(&surface_path, &surface)?;
            outcome.artifacts.push(surface_path);

            let env_path = cfg.out_dir.join("envelopes.csv");
            output::write_envelope_csv(&env_path, &surface, &norms, cfg.sandwich_slack)?;
            outcome.artifacts.push(env_path);

            let report = envelopes::sandwich_report(&surface, &norms, cfg.sandwich_slack)?;
            let sandwich_path = cfg.out_dir.join("sandwich.csv");
            std::fs::write(
                &sandwich_path,
                format!(
                    "nodes_checked,violations,max_rel_violation,interval_nodes,interval_violations,asymp_max_dev\n{},{},{:.16e},{},{},{:.16e}\n",
                    report.nodes_checked,
                    report.violations,
                    report.max_rel_violation,
                    report.interval_nodes,
                    report.interval_violations,
                    report.asymp_max_dev
                ),
            )?;
            outcome.artifacts.push(sandwich_path);
            outcome.summary.push(format!(
                "sandwich: {}/{} nodes violated (max rel {:.3e}), clamps = {}",
                report.violations,
                report.nodes_checked,
                report.max_rel_violation,
                surface.clamp_count()
            ));
            if report.violations > 0 || report.interval_violations > 0 {
                outcome.exit_code = 1;
            }
        }

        Subcommand::Envelopes => {
            let (norms, surface) = solve_surface(cfg)?;
            let env_path = cfg.out_dir.join("envelopes.csv");
            output::write_envelope_csv(&env_path, &surface, &norms, cfg.sandwich_slack)?;
            outcome.artifacts.push(env_path);
            outcome.summary.push("envelope table written".into());
        }

        Subcommand::Benchmark => {
            let kappa = cfg
                .model
                .separable_kappa()
                .ok_or_else(|| OdeError::NotSeparable(cfg.model.name.clone()))?;
            let (_, surface) = solve_surface(cfg)?;
            let table = odebench::solve_a(
                cfg.model.theta,
                kappa,
                cfg.model.horizon,
                cfg.eps,
                cfg.n_t,
                cfg.grading,
            )?;
            let ode_path = cfg.out_dir.join("ode_table.csv");
            output::write_ode_csv(&ode_path, &table)?;
            outcome.artifacts.push(ode_path);

            let y_cap = 0.6 * cfg.y_max.abs().min(cfg.y_min.abs());
            let t_cap = cfg.model.horizon - 10.0 * cfg.eps;
            let report = odebench::separable_compare(&surface, &table, y_cap, t_cap)?;
            let bench_path = cfg.out_dir.join("benchmark.csv");
            std::fs::write(
                &bench_path,
                format!(
                    "max_rel_error,nodes_compared,y_abs_max,t_max\n{:.16e},{},{:.16e},{:.16e}\n",
                    report.max_rel_error, report.nodes_compared, report.y_abs_max, report.t_max
                ),
            )?;
            outcome.artifacts.push(bench_path);
            outcome.summary.push(format!(
                "separable benchmark: max rel error {:.3e} over {} nodes",
                report.max_rel_error, report.nodes_compared
            ));
            if report.max_rel_error > 1e-2 {
                outcome.exit_code = 1;
            }
        }

        Subcommand::Simulate => {
            let (_, surface) = solve_surface(cfg)?;
            let value = PolicyValue::Surface(&surface);
            // one shared noise pair across the whole y0 list
            let pair = (
                derive_seed(cfg.base_seed, 0, STREAM_BROWNIAN),
                derive_seed(cfg.base_seed, 0, STREAM_POISSON),
            );
            let mut paths = Vec::new();
            let mut estimates = Vec::new();
            for &y0 in &cfg.y0_list {
                let p = simulate_policy(&value, &cfg.model, cfg.t0, y0, cfg.x0, cfg.dt, pair, Perturbation::None)?;
                outcome
                    .summary
                    .push(format!("y0 = {y0}: initial rate xi(0) = {:.6}", p.xi_path[0]));
                paths.push(p);
                let est = monte_carlo(
                    &value,
                    &cfg.model,
                    cfg.t0,
                    y0,
                    cfg.x0,
                    cfg.dt,
                    cfg.n_paths,
                    cfg.base_seed,
                    Perturbation::None,
                )?;
                estimates.push((format!("cost@y0={y0}"), est));
            }
            let rows: Vec<(usize, &crate::simulator::PathSample)> =
                paths.iter().enumerate().collect();
            let paths_path = cfg.out_dir.join("paths.csv");
            output::write_paths_csv(&paths_path, &rows)?;
            outcome.artifacts.push(paths_path);
            let est_path = cfg.out_dir.join("estimates.csv");
            output::write_estimates_csv(&est_path, &estimates)?;
            outcome.artifacts.push(est_path);
        }

        Subcommand::Verify => {
            let (norms, surface) = solve_surface(cfg)?;
            let value = PolicyValue::Surface(&surface);
            let battery = BatteryConfig {
                t0: cfg.t0,
                y0_list: cfg.y0_list.clone(),
                x0: cfg.x0,
                dt: cfg.dt,
                n_paths: cfg.n_paths,
                base_seed: cfg.base_seed,
            };
            let report = run_battery(&value, &cfg.model, &norms, &battery);
            let report_path = cfg.out_dir.join("report.csv");
            output::write_report_csv(&report_path, &report)?;
            outcome.artifacts.push(report_path);
            for c in &report.checks {
                outcome.summary.push(format!(
                    "{}: {} (measured {:.4e}, threshold {:.4e})",
                    c.name,
                    if c.pass { "pass" } else { "FAIL" },
                    c.measured,
                    c.threshold
                ));
            }
            if !report.all_pass() {
                outcome.exit_code = 1;
            }
        }
    }
    Ok(outcome)
}
