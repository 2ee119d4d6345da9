//! Minimal-time search: a sequence of fixed-time problems over decreasing
//! final times.
//!
//! A final time counts as feasible when the gradient projection method
//! drives the cost below `reach_tol`. The optimizer is local and has a finite
//! budget, so an "infeasible" verdict is only relative to that budget and the
//! reported time is an upper-bound estimate of the true minimal time.

use crate::error::{invalid, Error, Result};
use crate::gpm::{gpm_iterate, FixedTimeProblem, GpmSettings, OptResult, Termination};
use crate::integrator::ControlGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings<S> {
    /// Upper end; must be feasible.
    pub t_hi: S,
    pub t_lo: S,
    /// Cost threshold declaring the target reached.
    pub reach_tol: S,
    pub bisect_iters: usize,
    /// Start each solve from the closest feasible control found so far.
    pub warm_start: bool,
    /// Coherent seed for cold starts.
    pub v_seed: S,
}

impl<S: Scalar> SweepSettings<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_lo >= S::zero()) {
            return Err(invalid("t_lo", "must be non-negative"));
        }
        if !(self.t_lo < self.t_hi && self.t_hi.is_finite()) {
            return Err(invalid("t_hi", format!("must exceed t_lo = {}", self.t_lo)));
        }
        if !(self.reach_tol > S::zero()) {
            return Err(invalid("reach_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one fixed-time solve inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<S> {
    pub t_final: S,
    pub feasible: bool,
    pub result: OptResult<S>,
}

impl<S: Scalar> SweepRecord<S> {
    fn new(t_final: S, result: OptResult<S>, reach_tol: S) -> Self {
        Self {
            t_final,
            feasible: result.final_cost() <= reach_tol,
            result,
        }
    }

    pub fn cost(&self) -> S {
        self.result.final_cost()
    }

    pub fn iterations(&self) -> usize {
        self.result.iterations
    }

    pub fn termination(&self) -> Termination {
        self.result.termination
    }

    pub fn controls(&self) -> &ControlGrid<S> {
        &self.result.u_final
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<S> {
    /// Smallest feasible final time observed.
    pub t_min_estimate: S,
    /// `(t_infeasible, t_feasible)`; the lower end is `t_lo` if no
    /// infeasible time was met.
    pub bracket: (S, S),
    /// Every solve in the order it was performed.
    pub records: Vec<SweepRecord<S>>,
}

impl<S: Scalar> SweepResult<S> {
    /// Record of the solve at `t_min_estimate`.
    pub fn best(&self) -> &SweepRecord<S> {
        self.records
            .iter()
            .filter(|r| r.feasible)
            .min_by(|a, b| a.t_final.partial_cmp(&b.t_final).expect("finite times"))
            .expect("a sweep result always holds the feasible T_hi solve")
    }
}

fn solve_at<S: Scalar>(
    template: &FixedTimeProblem<S>,
    t_final: S,
    start: Option<&ControlGrid<S>>,
    gpm: &GpmSettings<S>,
    sweep: &SweepSettings<S>,
) -> Result<SweepRecord<S>> {
    let problem = template.with_final_time(t_final);
    let u0 = match start {
        Some(u) => u.resample(t_final, problem.intervals)?,
        None => problem.seeded_controls(sweep.v_seed)?,
    };
    let out = gpm_iterate(&u0, &problem, gpm)?;
    Ok(SweepRecord::new(t_final, out, sweep.reach_tol))
}

/// Bisection on the final time between `t_lo` and a feasible `t_hi`.
///
/// After `bisect_iters` halvings the bracket width is
/// `(t_hi - t_lo) / 2^bisect_iters`.
pub fn find_minimal_time<S: Scalar>(
    template: &FixedTimeProblem<S>,
    sweep: &SweepSettings<S>,
    gpm: &GpmSettings<S>,
) -> Result<SweepResult<S>> {
    sweep.validate()?;
    template.validate()?;

    let first = solve_at(template, sweep.t_hi, None, gpm, sweep)?;
    if !first.feasible {
        return Err(Error::InfeasibleAtTHi {
            t_hi: sweep.t_hi.to_f64().unwrap_or(f64::NAN),
            cost: first.cost().to_f64().unwrap_or(f64::NAN),
            reach_tol: sweep.reach_tol.to_f64().unwrap_or(f64::NAN),
        });
    }

    let (mut lo, mut hi) = (sweep.t_lo, sweep.t_hi);
    let mut best_controls = first.controls().clone();
    let mut records = vec![first];
    for _ in 0..sweep.bisect_iters {
        let mid = (lo + hi) * S::lit(0.5);
        let start = sweep.warm_start.then_some(&best_controls);
        let record = solve_at(template, mid, start, gpm, sweep)?;
        if record.feasible {
            hi = mid;
            best_controls = record.controls().clone();
        } else {
            lo = mid;
        }
        records.push(record);
    }

    Ok(SweepResult {
        t_min_estimate: hi,
        bracket: (lo, hi),
        records,
    })
}

/// Solves each final time of an explicit list independently from the seed
/// control, mirroring a decreasing sequence `T_1 > T_2 > ...`.
pub fn solve_time_grid<S: Scalar>(
    template: &FixedTimeProblem<S>,
    times: &[S],
    sweep: &SweepSettings<S>,
    gpm: &GpmSettings<S>,
) -> Result<Vec<SweepRecord<S>>> {
    template.validate()?;
    if let Some(bad) = times.iter().find(|t| !(**t > S::zero() && t.is_finite())) {
        return Err(invalid("grid", format!("final times must be positive, got {bad}")));
    }
    times
        .iter()
        .map(|&t| solve_at(template, t, None, gpm, sweep))
        .collect()
}
