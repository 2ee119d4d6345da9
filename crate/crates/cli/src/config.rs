//! JSON run configuration.
//!
//! Every key is optional; missing keys take the reference parameter set
//! (`omega = 1`, `gamma = 2e-3`, `kappa = 1e-2`, `v` in `[-10, 10]`,
//! `n` in `[0, 1]`, `alpha = 1e3`). States are given either as a Bloch
//! vector `[x1, x2, x3]` or as a density matrix of four `[re, im]` pairs in
//! row-major order.

use std::path::{Path, PathBuf};

use mintime_core::{
    bloch_from_density, default_substeps, Bloch, Bounds, Density, Error as CoreError, Mat2, Params,
    Problem, Settings, Sweep,
};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Control interval length used when `grid.intervals` is omitted.
pub const DEFAULT_CONTROL_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Bloch([f64; 3]),
    Density([[f64; 2]; 4]),
}

impl StateSpec {
    fn resolve(&self, field: &str) -> Result<Bloch, CliError> {
        match self {
            StateSpec::Bloch(x) => Bloch::try_from_array(*x).map_err(|e| CliError::config(field, e)),
            StateSpec::Density(pairs) => {
                let c = |k: usize| Complex::new(pairs[k][0], pairs[k][1]);
                let m: Mat2<f64> = [[c(0), c(1)], [c(2), c(3)]];
                let rho = Density::new(m).map_err(|e| CliError::config(field, e))?;
                bloch_from_density(&rho).map_err(|e| CliError::config(field, e))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub omega: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            gamma: 2e-3,
            kappa: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub n_max: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            v_min: -10.0,
            v_max: 10.0,
            n_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_final: f64,
    /// Defaults to `ceil(t_final / 0.25)`.
    pub intervals: Option<usize>,
    /// Defaults to the smallest count keeping the RK4 step at or below 0.005.
    pub substeps: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_final: 70.0,
            intervals: None,
            substeps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpmConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub beta_grid_size: usize,
    pub beta_refine_iters: usize,
    /// Constant coherent control of the initial guess.
    pub v_seed: f64,
    /// Run a finite-difference gradient check before iterating.
    pub preflight: bool,
}

impl Default for GpmConfig {
    fn default() -> Self {
        let s = Settings::default();
        Self {
            alpha: s.alpha,
            epsilon: s.epsilon,
            max_iters: s.max_iters,
            beta_grid_size: s.beta_grid_size,
            beta_refine_iters: s.beta_refine_iters,
            v_seed: 1.0,
            preflight: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub t_hi: f64,
    pub t_lo: f64,
    pub reach_tol: f64,
    pub bisect_iters: usize,
    pub warm_start: bool,
    /// Explicit list of final times; switches the sweep to grid mode.
    pub grid: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            t_hi: 400.0,
            t_lo: 0.0,
            reach_tol: 1e-6,
            bisect_iters: 8,
            warm_start: false,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub v: f64,
    pub n: f64,
    /// Control CSV written by `optimize`; overrides the constants.
    pub controls: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            v: 0.0,
            n: 0.0,
            controls: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub bounds: BoundsConfig,
    pub initial_state: StateSpec,
    pub target_state: StateSpec,
    pub grid: GridConfig,
    pub gpm: GpmConfig,
    pub sweep: SweepConfig,
    pub simulate: SimulateConfig,
    /// Seed for the random directions of the gradient check.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            bounds: BoundsConfig::default(),
            initial_state: StateSpec::Bloch([0.0, 0.0, -1.0]),
            target_state: StateSpec::Bloch([0.0, 0.0, 0.5]),
            grid: GridConfig::default(),
            gpm: GpmConfig::default(),
            sweep: SweepConfig::default(),
            simulate: SimulateConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

/// Configuration with every value checked and converted to library types.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub problem: Problem,
    pub gpm: Settings,
    pub v_seed: f64,
    pub sweep: Sweep,
}

fn positive(field: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: must be positive and finite, got {value}")))
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<Params, CliError> {
        let s = &self.system;
        Params::new(s.omega, s.gamma, s.kappa).map_err(|e| CliError::config("system", e))
    }

    pub fn control_bounds(&self) -> Result<Bounds, CliError> {
        let b = &self.bounds;
        Bounds::new(b.v_min, b.v_max, b.n_max).map_err(|e| CliError::config("bounds", e))
    }

    /// `(intervals, substeps)` for a final time, from the grid section.
    pub fn discretization(&self, t_final: f64) -> Result<(usize, usize), CliError> {
        positive("grid.t_final", t_final)?;
        let intervals = match self.grid.intervals {
            Some(0) => return Err(CliError::Config("grid.intervals: must be at least 1".into())),
            Some(n) => n,
            None => (t_final / DEFAULT_CONTROL_STEP).ceil().max(1.0) as usize,
        };
        let substeps = match self.grid.substeps {
            Some(0) => return Err(CliError::Config("grid.substeps: must be at least 1".into())),
            Some(s) => s,
            None => default_substeps(t_final / intervals as f64),
        };
        Ok((intervals, substeps))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let params = self.params()?;
        let bounds = self.control_bounds()?;
        let x0 = self.initial_state.resolve("initial_state")?;
        let x_target = self.target_state.resolve("target_state")?;
        let (intervals, substeps) = self.discretization(self.grid.t_final)?;
        let problem = Problem {
            params,
            bounds,
            x0,
            x_target,
            t_final: self.grid.t_final,
            intervals,
            substeps,
        };

        let g = &self.gpm;
        positive("gpm.alpha", g.alpha)?;
        if !(g.epsilon > 0.0 && g.epsilon < 1.0) {
            return Err(CliError::Config(format!("gpm.epsilon: must lie in (0, 1), got {}", g.epsilon)));
        }
        if g.beta_grid_size < 2 {
            return Err(CliError::Config("gpm.beta_grid_size: must be at least 2".into()));
        }
        if !g.v_seed.is_finite() {
            return Err(CliError::Config("gpm.v_seed: must be finite".into()));
        }
        let gpm = Settings {
            alpha: g.alpha,
            epsilon: g.epsilon,
            max_iters: g.max_iters,
            beta_grid_size: g.beta_grid_size,
            beta_refine_iters: g.beta_refine_iters,
        };

        let s = &self.sweep;
        let sweep = Sweep {
            t_hi: s.t_hi,
            t_lo: s.t_lo,
            reach_tol: s.reach_tol,
            bisect_iters: s.bisect_iters,
            warm_start: s.warm_start,
            v_seed: g.v_seed,
        };
        sweep.validate().map_err(|e| CliError::config("sweep", e))?;
        if let Some(grid) = &s.grid {
            if grid.is_empty() {
                return Err(CliError::Config("sweep.grid: must list at least one final time".into()));
            }
            for t in grid {
                positive("sweep.grid", *t)?;
            }
        }
        Ok(Resolved {
            problem,
            gpm,
            v_seed: g.v_seed,
            sweep,
        })
    }
}

impl CliError {
    pub(crate) fn config(section: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { field, reason } => CliError::Config(format!("{section}.{field}: {reason}")),
            other => CliError::Config(format!("{section}: {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.problem.params, Params::new(1.0, 2e-3, 1e-2).unwrap());
        assert_eq!(r.problem.bounds, Bounds::new(-10.0, 10.0, 1.0).unwrap());
        assert_eq!(r.gpm.alpha, 1e3);
        assert_eq!(r.problem.intervals, 280);
        assert_eq!(r.problem.substeps, 50);
    }

    #[test]
    fn density_states_are_converted() {
        let cfg = RunConfig::from_json(
            r#"{"initial_state": [[0.5, 0.0], [0.0, 0.5], [0.0, -0.5], [0.5, 0.0]],
                "target_state": [[0.75, 0.0], [0.0, 0.0], [0.0, 0.0], [0.25, 0.0]]}"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(*r.problem.x0.as_array(), [0.0, -1.0, 0.0]);
        assert_eq!(*r.problem.x_target.as_array(), [0.0, 0.0, 0.5]);
    }

    #[test]
    fn errors_name_the_field() {
        let cfg = RunConfig::from_json(r#"{"bounds": {"v_min": 5, "v_max": 1}}"#).unwrap();
        let msg = cfg.resolve().unwrap_err().to_string();
        assert!(msg.contains("bounds.v_min"), "{msg}");

        let msg = RunConfig::from_json("{\n  \"system\": {\"omegaa\": 1}\n}").unwrap_err().to_string();
        assert!(msg.contains("omegaa") && msg.contains("line 2"), "{msg}");

        let cfg = RunConfig::from_json(r#"{"target_state": [[1.5, 0], [0, 0], [0, 0], [-0.5, 0]]}"#).unwrap();
        let msg = cfg.resolve().unwrap_err().to_string();
        assert!(msg.contains("target_state") && msg.contains("positivity FAIL"), "{msg}");

        let cfg = RunConfig::from_json(r#"{"initial_state": [1, 1, 0]}"#).unwrap();
        assert!(cfg.resolve().unwrap_err().to_string().contains("initial_state"));

        let cfg = RunConfig::from_json(r#"{"sweep": {"t_hi": 10, "t_lo": 20}}"#).unwrap();
        assert!(cfg.resolve().unwrap_err().to_string().contains("sweep.t_hi"));
    }
}
