//! Command-line front end for the minimal-time two-level control solver.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mintime", version, about = "Minimal-time control of a two-level open quantum system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the Bloch equations under given controls.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Constant coherent control.
        #[arg(long)]
        v: Option<f64>,
        /// Constant incoherent control.
        #[arg(long)]
        n: Option<f64>,
        /// Piecewise-constant controls from a `controls.csv`.
        #[arg(long)]
        controls: Option<PathBuf>,
    },
    /// Minimize the terminal cost at a fixed final time.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Initial guess from a `controls.csv` instead of the constant seed.
        #[arg(long)]
        controls: Option<PathBuf>,
        /// Check the gradient against finite differences first.
        #[arg(long)]
        preflight: bool,
    },
    /// Search for the minimal final time.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_hi: Option<f64>,
        #[arg(long)]
        t_lo: Option<f64>,
        #[arg(long)]
        reach_tol: Option<f64>,
        #[arg(long)]
        bisect_iters: Option<usize>,
        #[arg(long)]
        warm_start: bool,
        /// Comma-separated final times; solves each instead of bisecting.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Compare the adjoint gradient with central finite differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controls: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        directions: usize,
    },
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub substeps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub v_seed: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.output_dir {
            cfg.output_dir = Some(d.clone());
        }
        if let Some(t) = self.t_final {
            cfg.grid.t_final = t;
        }
        if self.intervals.is_some() {
            cfg.grid.intervals = self.intervals;
        }
        if self.substeps.is_some() {
            cfg.grid.substeps = self.substeps;
        }
        if let Some(a) = self.alpha {
            cfg.gpm.alpha = a;
        }
        if let Some(e) = self.epsilon {
            cfg.gpm.epsilon = e;
        }
        if let Some(m) = self.max_iters {
            cfg.gpm.max_iters = m;
        }
        if let Some(v) = self.v_seed {
            cfg.gpm.v_seed = v;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary types serialize"));
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, v, n, controls } => {
            let mut cfg = common.load()?;
            if let Some(v) = v {
                cfg.simulate.v = v;
            }
            if let Some(n) = n {
                cfg.simulate.n = n;
            }
            if controls.is_some() {
                cfg.simulate.controls = controls;
            }
            print_json(&commands::run_simulate(&cfg)?);
        }
        Command::Optimize { common, controls, preflight } => {
            let mut cfg = common.load()?;
            cfg.gpm.preflight |= preflight;
            print_json(&commands::run_optimize(&cfg, controls.as_deref())?);
        }
        Command::Sweep {
            common,
            t_hi,
            t_lo,
            reach_tol,
            bisect_iters,
            warm_start,
            grid,
        } => {
            let mut cfg = common.load()?;
            let s = &mut cfg.sweep;
            s.t_hi = t_hi.unwrap_or(s.t_hi);
            s.t_lo = t_lo.unwrap_or(s.t_lo);
            s.reach_tol = reach_tol.unwrap_or(s.reach_tol);
            s.bisect_iters = bisect_iters.unwrap_or(s.bisect_iters);
            s.warm_start |= warm_start;
            if grid.is_some() {
                s.grid = grid;
            }
            let report = commands::run_sweep(&cfg)?;
            let mut brief = report.clone();
            brief.records.clear();
            print_json(&brief);
        }
        Command::GradCheck { common, controls, directions } => {
            let cfg = common.load()?;
            if directions == 0 {
                return Err(CliError::Config("--directions: must be at least 1".into()));
            }
            let summary = commands::run_grad_check(&cfg, controls.as_deref(), directions)?;
            print_json(&summary);
            if !summary.passed {
                return Err(CliError::Numerical(format!(
                    "gradient mismatch {:.3e} exceeds {:e}",
                    summary.max_relative_error, summary.tolerance
                )));
            }
        }
    }
    Ok(())
}
