//! Minimal-time steering of a dissipative two-level quantum system with a
//! coherent control `v(t)` and an incoherent control `n(t) >= 0`.
//!
//! States are handled as Bloch vectors. A fixed-time problem
//! `min |x(T) - x_target|^2` is solved with a gradient projection method
//! whose gradient comes from the conjugate (Pontryagin) system; the
//! minimal time is then bracketed by solving a sequence of such problems.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// Validation uses `!(a <= b)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gpm;
pub mod integrator;
pub mod minimal_time;
pub mod scalar;
pub mod state;

pub use dynamics::{
    adjoint_rhs, bloch_rhs, pontryagin_h, switching_functions, terminal_adjoint, AdjointVector,
    AffineField, ControlBounds, SystemParams,
};
pub use error::{Error, Result};
pub use gpm::{
    check_gradient, compute_gradient, convex_combination, gpm_iterate, is_feasible, line_search_beta,
    project_controls, FixedTimeProblem, Gradient, GradientCheck, GpmSettings, LineSearch, OptResult,
    StepRecord, Termination,
};
pub use integrator::{
    cost, default_substeps, final_state, integrate_adjoint, integrate_forward, rk4_step, terminal_cost,
    AdjointTrajectory, ControlGrid, StepMap, Trajectory, DEFAULT_MAX_STEP,
};
pub use minimal_time::{find_minimal_time, solve_time_grid, SweepRecord, SweepResult, SweepSettings};
pub use scalar::{Mat3, Scalar, Vec3};
pub use state::{
    bloch_from_density, density_from_bloch, master_rhs_density, pauli_coordinates, validate_density,
    BlochVector, DensityMatrix, DensityReport, Mat2,
};

pub type Real = f64;
pub type Bloch = BlochVector<f64>;
pub type Adjoint = AdjointVector<f64>;
pub type Density = DensityMatrix<f64>;
pub type Params = SystemParams<f64>;
pub type Bounds = ControlBounds<f64>;
pub type Controls = ControlGrid<f64>;
pub type Problem = FixedTimeProblem<f64>;
pub type Settings = GpmSettings<f64>;
pub type Sweep = SweepSettings<f64>;
