//! Gradient projection method for one fixed-time problem
//! `min |x(T) - x_target|^2` over controls in the box `Q`.
//!
//! Each iteration computes the cost gradient from the forward and conjugate
//! solutions, takes a step of size `alpha` along it, projects the result onto
//! `Q`, and moves toward the projected control by the convex weight `beta`
//! minimizing the cost.

use crate::dynamics::{adjoint_field, bloch_field, switching, terminal_adjoint, AdjointVector, ControlBounds, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::integrator::{
    dense_forward, final_state, terminal_cost, AdjointTrajectory, ControlGrid, StepMap, Trajectory,
};
use crate::scalar::{is_finite3, Scalar, Vec3};
use crate::state::BlochVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpmSettings<S> {
    /// Gradient step scale.
    pub alpha: S,
    /// Stop once successive costs differ by less than this.
    pub epsilon: S,
    pub max_iters: usize,
    /// Uniform grid over `(0, 1]` scanned before refinement.
    pub beta_grid_size: usize,
    /// Golden-section iterations around the best grid point.
    pub beta_refine_iters: usize,
}

impl<S: Scalar> Default for GpmSettings<S> {
    fn default() -> Self {
        Self {
            alpha: S::lit(1e3),
            epsilon: S::lit(1e-9),
            max_iters: 500,
            beta_grid_size: 32,
            beta_refine_iters: 20,
        }
    }
}

impl<S: Scalar> GpmSettings<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > S::zero() && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.epsilon > S::zero() && self.epsilon < S::one()) {
            return Err(invalid("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.beta_grid_size < 2 {
            return Err(invalid("beta_grid_size", "must be at least 2"));
        }
        Ok(())
    }
}

/// One fixed-time optimal control problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTimeProblem<S> {
    pub params: SystemParams<S>,
    pub bounds: ControlBounds<S>,
    pub x0: BlochVector<S>,
    pub x_target: BlochVector<S>,
    pub t_final: S,
    pub intervals: usize,
    pub substeps: usize,
}

impl<S: Scalar> FixedTimeProblem<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > S::zero() && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.intervals == 0 {
            return Err(invalid("intervals", "must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> S {
        self.t_final / S::count(self.intervals)
    }

    /// Constant control `(v_seed, 0)` projected onto the box.
    pub fn seeded_controls(&self, v_seed: S) -> Result<ControlGrid<S>> {
        ControlGrid::constant(self.t_final, self.intervals, self.bounds.clamp_v(v_seed), S::zero())
    }

    /// Same problem at another final time, keeping the control interval
    /// length and the RK4 step no larger than before.
    pub fn with_final_time(&self, t_final: S) -> Self {
        let dt = self.dt();
        let h = dt / S::count(self.substeps);
        let intervals = (t_final / dt).round().to_usize().unwrap_or(1).max(1);
        let new_dt = t_final / S::count(intervals);
        let substeps = (new_dt / h * (S::one() - S::lit(1e-12)))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        Self {
            t_final,
            intervals,
            substeps,
            ..*self
        }
    }

    /// `J(u) = |x(T) - x_target|^2`.
    pub fn cost(&self, u: &ControlGrid<S>) -> Result<S> {
        let x_final = final_state(&self.x0, u, &self.params, self.substeps)?;
        Ok(terminal_cost(&x_final, &self.x_target))
    }

    fn check_grid(&self, u: &ControlGrid<S>) -> Result<()> {
        if u.intervals() != self.intervals {
            return Err(invalid(
                "intervals",
                format!("control grid has {} intervals, problem expects {}", u.intervals(), self.intervals),
            ));
        }
        Ok(())
    }
}

/// Componentwise clipping onto `[v_min, v_max] x [0, n_max]`.
pub fn project_controls<S: Scalar>(u: &ControlGrid<S>, bounds: &ControlBounds<S>) -> ControlGrid<S> {
    let mut out = u.clone();
    let (v, n) = out.parts_mut();
    v.iter_mut().for_each(|c| *c = bounds.clamp_v(*c));
    n.iter_mut().for_each(|c| *c = bounds.clamp_n(*c));
    out
}

pub fn is_feasible<S: Scalar>(u: &ControlGrid<S>, bounds: &ControlBounds<S>) -> bool {
    u.v().iter().zip(u.n()).all(|(&v, &n)| bounds.contains(v, n))
}

/// Cost gradient on the control grid together with the solutions it came from.
///
/// `gv[i]` and `gn[i]` are the interval averages of `-K_v(p, x)` and
/// `-K_n(p, x)`, so the first-order change of the cost under a perturbation
/// `(dv, dn)` is `sum_i (gv[i] dv[i] + gn[i] dn[i]) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<S> {
    pub gv: Vec<S>,
    pub gn: Vec<S>,
    pub cost: S,
    pub trajectory: Trajectory<S>,
    pub adjoint: AdjointTrajectory<S>,
}

impl<S: Scalar> Gradient<S> {
    /// `sum_i (gv[i] dv[i] + gn[i] dn[i]) dt`
    pub fn directional(&self, dv: &[S], dn: &[S], dt: S) -> S {
        let sv: S = self.gv.iter().zip(dv).map(|(&g, &d)| g * d).sum();
        let sn: S = self.gn.iter().zip(dn).map(|(&g, &d)| g * d).sum();
        (sv + sn) * dt
    }
}

#[inline]
fn switching_rate<S: Scalar>(p: &Vec3<S>, x: &Vec3<S>, v: S, n: S, params: &SystemParams<S>) -> (S, S) {
    // K is bilinear in (p, x): dK/dt = K(p', x) + K(p, x')
    let (a_v, a_n) = switching(&adjoint_field(p, v, n, params), x, params);
    let (b_v, b_n) = switching(p, &bloch_field(x, v, n, params), params);
    (a_v + b_v, a_n + b_n)
}

/// Gradient of the terminal cost from the forward and conjugate solutions.
///
/// The switching functions are integrated over each control interval with
/// the endpoint-corrected trapezoid rule on the RK4 nodes, which is fourth
/// order in the substep and so consistent with the integrator.
pub fn compute_gradient<S: Scalar>(u: &ControlGrid<S>, problem: &FixedTimeProblem<S>) -> Result<Gradient<S>> {
    problem.validate()?;
    problem.check_grid(u)?;
    let params = &problem.params;
    let s = problem.substeps;
    let intervals = u.intervals();
    let dt = u.dt();
    let h = dt / S::count(s);
    let half = S::lit(0.5);
    let twelfth = S::one() / S::lit(12.0);

    let nodes = dense_forward(&problem.x0, u, params, s)?;
    let x_final = BlochVector::from_array_unchecked(nodes[nodes.len() - 1]);
    let cost = terminal_cost(&x_final, &problem.x_target);
    let p_final = terminal_adjoint(&x_final, &problem.x_target);

    let mut gv = vec![S::zero(); intervals];
    let mut gn = vec![S::zero(); intervals];
    let mut costates = vec![AdjointVector::zero(); intervals + 1];
    costates[intervals] = p_final;
    let mut p = *p_final.as_array();

    for i in (0..intervals).rev() {
        let (v, n) = (u.v()[i], u.n()[i]);
        let map = StepMap::rk4(v, n, params, h);
        let end = (i + 1) * s;
        let (end_rate_v, end_rate_n) = switching_rate(&p, &nodes[end], v, n, params);
        let (mut prev_v, mut prev_n) = switching(&p, &nodes[end], params);
        let (mut sum_v, mut sum_n) = (S::zero(), S::zero());
        for k in (i * s..end).rev() {
            p = map.backward(&p);
            let (kv, kn) = switching(&p, &nodes[k], params);
            sum_v = sum_v + half * (kv + prev_v);
            sum_n = sum_n + half * (kn + prev_n);
            prev_v = kv;
            prev_n = kn;
        }
        if !is_finite3(&p) {
            return Err(Error::NonFiniteState {
                time: u.time(i).to_f64().unwrap_or(f64::NAN),
            });
        }
        let (start_rate_v, start_rate_n) = switching_rate(&p, &nodes[i * s], v, n, params);
        let int_v = h * sum_v + h * h * twelfth * (start_rate_v - end_rate_v);
        let int_n = h * sum_n + h * h * twelfth * (start_rate_n - end_rate_n);
        gv[i] = -int_v / dt;
        gn[i] = -int_n / dt;
        costates[i] = AdjointVector::from_array_unchecked(p);
    }

    let times: Vec<S> = (0..=intervals).map(|i| u.time(i)).collect();
    let states = (0..=intervals)
        .map(|i| BlochVector::from_array_unchecked(nodes[i * s]))
        .collect();
    Ok(Gradient {
        gv,
        gn,
        cost,
        trajectory: Trajectory {
            times: times.clone(),
            states,
        },
        adjoint: AdjointTrajectory { times, costates },
    })
}

/// `u + beta (u_pr - u)`, evaluated as `(1 - beta) u + beta u_pr` so that
/// `beta = 1` returns `u_pr` exactly.
pub fn convex_combination<S: Scalar>(u: &ControlGrid<S>, u_pr: &ControlGrid<S>, beta: S) -> ControlGrid<S> {
    let mut out = u.clone();
    let (v, n) = out.parts_mut();
    let keep = S::one() - beta;
    for (c, &t) in v.iter_mut().zip(u_pr.v()) {
        *c = keep * *c + beta * t;
    }
    for (c, &t) in n.iter_mut().zip(u_pr.n()) {
        *c = keep * *c + beta * t;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch<S> {
    pub beta: S,
    pub cost: S,
    pub evaluations: usize,
}

/// Minimizes `f(beta) = J(u + beta (u_pr - u))` over `beta in (0, 1]`.
///
/// Scans a uniform grid `beta_j = j / G`, then runs golden-section search on
/// the bracket formed by the neighbors of the best grid point. Ties keep the
/// smallest `beta`.
pub fn line_search_beta<S: Scalar>(
    u: &ControlGrid<S>,
    u_pr: &ControlGrid<S>,
    problem: &FixedTimeProblem<S>,
    settings: &GpmSettings<S>,
) -> Result<LineSearch<S>> {
    settings.validate()?;
    let grid = settings.beta_grid_size;
    let mut evaluations = 0;
    let mut f = |beta: S| -> Result<S> {
        evaluations += 1;
        problem.cost(&convex_combination(u, u_pr, beta))
    };

    let step = S::one() / S::count(grid);
    let mut best_j = 1;
    let mut best_cost = f(step)?;
    for j in 2..=grid {
        let c = f(S::count(j) * step)?;
        if c < best_cost {
            best_cost = c;
            best_j = j;
        }
    }
    let mut best_beta = S::count(best_j) * step;

    if settings.beta_refine_iters > 0 {
        let mut lo = S::count(best_j - 1) * step;
        let mut hi = (S::count(best_j + 1) * step).min(S::one());
        let ratio = (S::lit(5.0).sqrt() - S::one()) * S::lit(0.5);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let mut fa = f(a)?;
        let mut fb = f(b)?;
        for _ in 0..settings.beta_refine_iters {
            for (beta, c) in [(a, fa), (b, fb)] {
                if c < best_cost && beta > S::zero() {
                    best_cost = c;
                    best_beta = beta;
                }
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - ratio * (hi - lo);
                fa = f(a)?;
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + ratio * (hi - lo);
                fb = f(b)?;
            }
        }
        for (beta, c) in [(a, fa), (b, fb)] {
            if c < best_cost && beta > S::zero() {
                best_cost = c;
                best_beta = beta;
            }
        }
    }

    Ok(LineSearch {
        beta: best_beta,
        cost: best_cost,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `|J(u^(k+1)) - J(u^(k))| < epsilon`
    EpsilonReached,
    /// No `beta` in `(0, 1]` lowered the cost.
    NoImprovingBeta,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EpsilonReached => "epsilon_reached",
            Termination::NoImprovingBeta => "no_improving_beta",
            Termination::MaxIters => "max_iters",
        }
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<S> {
    pub iter: usize,
    /// Cost of the iterate after this step (unchanged if rejected).
    pub cost: S,
    pub beta: S,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<S> {
    pub u_final: ControlGrid<S>,
    /// `J(u^(0)), J(u^(1)), ...` over accepted iterates.
    pub cost_history: Vec<S>,
    /// Row 0 is the initial control; later rows are line-search outcomes.
    pub steps: Vec<StepRecord<S>>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_trajectory: Trajectory<S>,
}

impl<S: Scalar> OptResult<S> {
    pub fn final_cost(&self) -> S {
        *self.cost_history.last().expect("history holds the initial cost")
    }
}

/// Runs the gradient projection iteration from `u0`.
pub fn gpm_iterate<S: Scalar>(
    u0: &ControlGrid<S>,
    problem: &FixedTimeProblem<S>,
    settings: &GpmSettings<S>,
) -> Result<OptResult<S>> {
    settings.validate()?;
    problem.validate()?;
    problem.check_grid(u0)?;
    if !is_feasible(u0, &problem.bounds) {
        return Err(invalid("controls", "initial control lies outside the admissible box"));
    }

    let mut u = u0.clone();
    let mut grad = compute_gradient(&u, problem)?;
    let mut cost = grad.cost;
    let mut cost_history = vec![cost];
    let mut steps = vec![StepRecord {
        iter: 0,
        cost,
        beta: S::zero(),
        accepted: false,
    }];
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for k in 1..=settings.max_iters {
        iterations = k;
        let mut candidate = u.clone();
        {
            let (v, n) = candidate.parts_mut();
            for (c, &g) in v.iter_mut().zip(&grad.gv) {
                *c = *c - settings.alpha * g;
            }
            for (c, &g) in n.iter_mut().zip(&grad.gn) {
                *c = *c - settings.alpha * g;
            }
        }
        let u_pr = project_controls(&candidate, &problem.bounds);
        let search = line_search_beta(&u, &u_pr, problem, settings)?;

        if search.cost > cost {
            steps.push(StepRecord {
                iter: k,
                cost,
                beta: search.beta,
                accepted: false,
            });
            termination = Termination::NoImprovingBeta;
            break;
        }

        // The combination of two points of Q stays in Q; the projection only
        // absorbs last-ulp rounding.
        let next = project_controls(&convex_combination(&u, &u_pr, search.beta), &problem.bounds);
        let next_grad = compute_gradient(&next, problem)?;
        if next_grad.cost > cost {
            steps.push(StepRecord {
                iter: k,
                cost,
                beta: search.beta,
                accepted: false,
            });
            termination = Termination::NoImprovingBeta;
            break;
        }
        let previous = cost;
        u = next;
        grad = next_grad;
        cost = grad.cost;
        cost_history.push(cost);
        steps.push(StepRecord {
            iter: k,
            cost,
            beta: search.beta,
            accepted: true,
        });
        if (previous - cost).abs() < settings.epsilon {
            termination = Termination::EpsilonReached;
            break;
        }
    }

    Ok(OptResult {
        u_final: u,
        cost_history,
        steps,
        iterations,
        termination,
        final_trajectory: grad.trajectory,
    })
}

/// Outcome of comparing adjoint and finite-difference directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck<S> {
    pub max_relative_error: S,
    pub directions: usize,
}

/// Compares the adjoint directional derivative with a fourth-order central
/// difference of step `delta` along each supplied direction `(dv, dn)`.
pub fn check_gradient<S: Scalar>(
    u: &ControlGrid<S>,
    problem: &FixedTimeProblem<S>,
    directions: &[(Vec<S>, Vec<S>)],
    delta: S,
) -> Result<GradientCheck<S>> {
    let grad = compute_gradient(u, problem)?;
    let dt = u.dt();
    let mut worst = S::zero();
    for (dv, dn) in directions {
        let shifted = |sign: S| -> Result<S> {
            let v = u.v().iter().zip(dv).map(|(&a, &d)| a + sign * delta * d).collect();
            let n = u.n().iter().zip(dn).map(|(&a, &d)| a + sign * delta * d).collect();
            problem.cost(&ControlGrid::new(u.t_final(), v, n)?)
        };
        let two = S::lit(2.0);
        let fd = (S::lit(8.0) * (shifted(S::one())? - shifted(-S::one())?) - (shifted(two)? - shifted(-two)?))
            / (S::lit(12.0) * delta);
        let adj = grad.directional(dv, dn, dt);
        let scale = fd.abs().max(adj.abs()).max(S::min_positive_value());
        worst = worst.max((fd - adj).abs() / scale);
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        directions: directions.len(),
    })
}
