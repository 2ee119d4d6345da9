//! The four subcommands, written against an already-loaded [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use mintime_core::{
    check_gradient, find_minimal_time, gpm_iterate, integrate_forward, is_feasible, solve_time_grid, Controls,
    OptResult, Problem, SweepRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output;

/// Finite-difference step of the gradient check.
pub const GRAD_CHECK_DELTA: f64 = 1e-4;
/// Largest acceptable relative mismatch between adjoint and FD derivatives.
pub const GRAD_CHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct ParamsSummary {
    pub omega: f64,
    pub gamma: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    #[serde(rename = "J_final")]
    pub j_final: f64,
    pub norm_max: f64,
    pub final_state: [f64; 3],
    pub t_final: f64,
    pub intervals: usize,
    pub substeps: usize,
    pub params: ParamsSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    #[serde(rename = "J_final")]
    pub j_final: f64,
    #[serde(rename = "J_initial")]
    pub j_initial: f64,
    pub iterations: usize,
    pub termination: &'static str,
    pub final_state: [f64; 3],
    pub t_final: f64,
    pub intervals: usize,
    pub substeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preflight_max_relative_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecordSummary {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "J_final")]
    pub j_final: f64,
    pub iterations: usize,
    pub termination: &'static str,
    pub feasible: bool,
    /// Control file, relative to the output directory.
    pub controls: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub mode: &'static str,
    /// Smallest final time at which the target was reached; an upper-bound
    /// estimate of the minimal time under the optimizer budget.
    pub t_min_estimate: Option<f64>,
    pub estimate_kind: &'static str,
    /// `[t_infeasible, t_feasible]`; `null` ends are unknown.
    pub bracket: [Option<f64>; 2],
    pub reach_tol: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<SweepRecordSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckSummary {
    pub max_relative_error: f64,
    pub directions: usize,
    pub delta: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn params_summary(p: &Problem) -> ParamsSummary {
    ParamsSummary {
        omega: p.params.omega(),
        gamma: p.params.gamma(),
        kappa: p.params.kappa(),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("output_dir: required (pass --output-dir)".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Loads controls from a file and fits the problem grid to them.
fn problem_for_controls(cfg: &RunConfig, problem: &Problem, u: &Controls) -> Result<Problem, CliError> {
    let substeps = match cfg.grid.substeps {
        Some(s) => s,
        None => mintime_core::default_substeps(u.dt()),
    };
    Ok(Problem {
        t_final: u.t_final(),
        intervals: u.intervals(),
        substeps,
        ..*problem
    })
}

pub fn run_simulate(cfg: &RunConfig) -> Result<SimulateSummary, CliError> {
    let resolved = cfg.resolve()?;
    let dir = output_dir(cfg)?;
    let (problem, u) = match &cfg.simulate.controls {
        Some(path) => {
            let u = output::read_controls(path)?;
            (problem_for_controls(cfg, &resolved.problem, &u)?, u)
        }
        None => {
            let p = resolved.problem;
            let u = Controls::constant(p.t_final, p.intervals, cfg.simulate.v, cfg.simulate.n)?;
            (p, u)
        }
    };
    if !is_feasible(&u, &problem.bounds) {
        return Err(CliError::Config("simulate: controls lie outside the admissible box `bounds`".into()));
    }
    let traj = integrate_forward(&problem.x0, &u, &problem.params, problem.substeps)?;
    let summary = SimulateSummary {
        j_final: mintime_core::cost(&traj, &problem.x_target),
        norm_max: traj.max_norm(),
        final_state: *traj.final_state().as_array(),
        t_final: problem.t_final,
        intervals: problem.intervals,
        substeps: problem.substeps,
        params: params_summary(&problem),
    };
    output::write_trajectory(&dir.join("trajectory.csv"), &traj, &u)?;
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn random_directions(seed: u64, intervals: usize, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dv = (0..intervals).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let dn = (0..intervals).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            (dv, dn)
        })
        .collect()
}

fn grad_check_at(cfg: &RunConfig, problem: &Problem, u: &Controls, directions: usize) -> Result<GradCheckSummary, CliError> {
    let dirs = random_directions(cfg.seed, u.intervals(), directions);
    let check = check_gradient(u, problem, &dirs, GRAD_CHECK_DELTA)?;
    Ok(GradCheckSummary {
        max_relative_error: check.max_relative_error,
        directions: check.directions,
        delta: GRAD_CHECK_DELTA,
        tolerance: GRAD_CHECK_TOL,
        passed: check.max_relative_error <= GRAD_CHECK_TOL,
    })
}

fn initial_controls(
    cfg: &RunConfig,
    problem: &Problem,
    v_seed: f64,
    file: Option<&Path>,
) -> Result<(Problem, Controls), CliError> {
    match file {
        Some(path) => {
            let u = output::read_controls(path)?;
            let p = problem_for_controls(cfg, problem, &u)?;
            if !is_feasible(&u, &p.bounds) {
                return Err(CliError::Config(format!(
                    "{}: controls lie outside the admissible box `bounds`",
                    path.display()
                )));
            }
            Ok((p, u))
        }
        None => Ok((*problem, problem.seeded_controls(v_seed)?)),
    }
}

fn write_solution(dir: &Path, out: &OptResult<f64>, summary: &OptimizeSummary) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    output::write_controls(&dir.join("controls.csv"), &out.u_final)?;
    output::write_trajectory(&dir.join("trajectory.csv"), &out.final_trajectory, &out.u_final)?;
    output::write_convergence(&dir.join("convergence.csv"), &out.steps)?;
    output::write_json(&dir.join("summary.json"), summary)
}

fn optimize_summary(problem: &Problem, out: &OptResult<f64>, preflight: Option<f64>) -> OptimizeSummary {
    OptimizeSummary {
        j_final: out.final_cost(),
        j_initial: out.cost_history[0],
        iterations: out.iterations,
        termination: out.termination.as_str(),
        final_state: *out.final_trajectory.final_state().as_array(),
        t_final: problem.t_final,
        intervals: problem.intervals,
        substeps: problem.substeps,
        preflight_max_relative_error: preflight,
    }
}

/// Runs the gradient projection method; `initial` optionally names a control
/// file used as the starting guess instead of the constant seed.
pub fn run_optimize(cfg: &RunConfig, initial: Option<&Path>) -> Result<OptimizeSummary, CliError> {
    let resolved = cfg.resolve()?;
    let dir = output_dir(cfg)?;
    let (problem, u0) = initial_controls(cfg, &resolved.problem, resolved.v_seed, initial)?;

    let preflight = if cfg.gpm.preflight {
        let check = grad_check_at(cfg, &problem, &u0, 10)?;
        println!(
            "gradient pre-flight: max relative FD mismatch {:.3e} over {} directions",
            check.max_relative_error, check.directions
        );
        if !check.passed {
            return Err(CliError::Numerical(format!(
                "gradient pre-flight mismatch {:.3e} exceeds {GRAD_CHECK_TOL:e}",
                check.max_relative_error
            )));
        }
        Some(check.max_relative_error)
    } else {
        None
    };

    let out = gpm_iterate(&u0, &problem, &resolved.gpm)?;
    let summary = optimize_summary(&problem, &out, preflight);
    write_solution(&dir, &out, &summary)?;
    Ok(summary)
}

fn record_dir(t: f64) -> String {
    format!("T_{t:?}")
}

fn summarize_records(dir: &Path, template: &Problem, records: &[SweepRecord<f64>]) -> Result<Vec<SweepRecordSummary>, CliError> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let name = record_dir(r.t_final);
        let problem = template.with_final_time(r.t_final);
        write_solution(&dir.join(&name), &r.result, &optimize_summary(&problem, &r.result, None))?;
        out.push(SweepRecordSummary {
            t_final: r.t_final,
            j_final: r.cost(),
            iterations: r.iterations(),
            termination: r.termination().as_str(),
            feasible: r.feasible,
            controls: format!("{name}/controls.csv"),
        });
    }
    Ok(out)
}

const ESTIMATE_KIND: &str = "upper bound on the minimal time under the optimizer budget";

/// Bisection over final times, or grid mode when `sweep.grid` is set.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let resolved = cfg.resolve()?;
    let dir = output_dir(cfg)?;
    let template = resolved.problem;

    let report = match &cfg.sweep.grid {
        Some(times) => {
            let records = solve_time_grid(&template, times, &resolved.sweep, &resolved.gpm)?;
            let best = records
                .iter()
                .filter(|r| r.feasible)
                .map(|r| r.t_final)
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
            let below = best.and_then(|b| {
                records
                    .iter()
                    .filter(|r| !r.feasible && r.t_final < b)
                    .map(|r| r.t_final)
                    .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
            });
            SweepReport {
                mode: "grid",
                t_min_estimate: best,
                estimate_kind: ESTIMATE_KIND,
                bracket: [below, best],
                reach_tol: resolved.sweep.reach_tol,
                records: summarize_records(&dir, &template, &records)?,
            }
        }
        None => {
            let result = find_minimal_time(&template, &resolved.sweep, &resolved.gpm)?;
            SweepReport {
                mode: "bisection",
                t_min_estimate: Some(result.t_min_estimate),
                estimate_kind: ESTIMATE_KIND,
                bracket: [Some(result.bracket.0), Some(result.bracket.1)],
                reach_tol: resolved.sweep.reach_tol,
                records: summarize_records(&dir, &template, &result.records)?,
            }
        }
    };
    output::write_json(&dir.join("sweep.json"), &report)?;
    Ok(report)
}

/// Compares adjoint and central-difference directional derivatives along
/// `directions` random directions drawn from the configured seed.
pub fn run_grad_check(cfg: &RunConfig, controls: Option<&Path>, directions: usize) -> Result<GradCheckSummary, CliError> {
    let resolved = cfg.resolve()?;
    let (problem, u) = initial_controls(cfg, &resolved.problem, resolved.v_seed, controls)?;
    let summary = grad_check_at(cfg, &problem, &u, directions)?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        output::write_json(&dir.join("grad_check.json"), &summary)?;
    }
    Ok(summary)
}
