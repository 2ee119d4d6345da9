//! Fixed-step classical Runge-Kutta integration of the Bloch system and of
//! its conjugate system on a grid of piecewise-constant controls.
//!
//! Within one control interval both systems are linear with constant
//! coefficients, so a single RK4 step of length `h` is the affine map
//! `x -> R(hA) x + h P(hA) b` with `R(z) = 1 + z + z^2/2 + z^3/6 + z^4/24`
//! and `P(z) = 1 + z/2 + z^2/6 + z^3/24`. [`StepMap`] builds that map once
//! per interval and replays it for every substep. Stepping the costate
//! backward with RK4 gives `p(t - h) = R(hA)^T p(t)`, i.e. the transpose of
//! the forward map.

use crate::dynamics::{AdjointVector, AffineField, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, is_finite3, Mat3, Scalar, Vec3};
use crate::state::BlochVector;

/// Largest RK4 substep used when the substep count is derived automatically.
pub const DEFAULT_MAX_STEP: f64 = 0.005;

/// Number of substeps per interval of length `dt` keeping the RK4 step at or
/// below [`DEFAULT_MAX_STEP`].
pub fn default_substeps<S: Scalar>(dt: S) -> usize {
    let ratio = (dt / S::lit(DEFAULT_MAX_STEP)).ceil();
    ratio.to_usize().unwrap_or(1).max(1)
}

/// Piecewise-constant controls: `v[i]`, `n[i]` act on `[i dt, (i + 1) dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid<S> {
    t_final: S,
    v: Vec<S>,
    n: Vec<S>,
}

impl<S: Scalar> ControlGrid<S> {
    pub fn new(t_final: S, v: Vec<S>, n: Vec<S>) -> Result<Self> {
        if !(t_final > S::zero() && t_final.is_finite()) {
            return Err(invalid("t_final", format!("must be positive and finite, got {t_final}")));
        }
        if v.is_empty() {
            return Err(invalid("intervals", "control grid needs at least one interval"));
        }
        if v.len() != n.len() {
            return Err(invalid(
                "intervals",
                format!("coherent and incoherent controls differ in length ({} vs {})", v.len(), n.len()),
            ));
        }
        if !v.iter().chain(n.iter()).all(|c| c.is_finite()) {
            return Err(invalid("controls", "control values must be finite"));
        }
        Ok(Self { t_final, v, n })
    }

    pub fn constant(t_final: S, intervals: usize, v: S, n: S) -> Result<Self> {
        Self::new(t_final, vec![v; intervals], vec![n; intervals])
    }

    pub fn t_final(&self) -> S {
        self.t_final
    }

    pub fn intervals(&self) -> usize {
        self.v.len()
    }

    pub fn dt(&self) -> S {
        self.t_final / S::count(self.v.len())
    }

    /// Start time of interval `i` (or `T` for `i = N`).
    /// Start of interval `i`; `time(intervals())` is exactly `t_final`.
    pub fn time(&self, i: usize) -> S {
        if i == self.v.len() {
            return self.t_final;
        }
        self.t_final * S::count(i) / S::count(self.v.len())
    }

    pub fn v(&self) -> &[S] {
        &self.v
    }

    pub fn n(&self) -> &[S] {
        &self.n
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [S], &mut [S]) {
        (&mut self.v, &mut self.n)
    }

    /// Resamples onto a grid with final time `t_final` and `intervals`
    /// intervals. Each new interval takes the value of the old interval that
    /// contains its midpoint (absolute time); times past the old horizon
    /// reuse the last interval.
    pub fn resample(&self, t_final: S, intervals: usize) -> Result<Self> {
        let dt_new = t_final / S::count(intervals.max(1));
        let dt_old = self.dt();
        let last = self.v.len() - 1;
        let (mut v, mut n) = (Vec::with_capacity(intervals), Vec::with_capacity(intervals));
        for i in 0..intervals {
            let mid = (S::count(i) + S::lit(0.5)) * dt_new;
            let j = (mid / dt_old).floor().to_usize().unwrap_or(last).min(last);
            v.push(self.v[j]);
            n.push(self.n[j]);
        }
        Self::new(t_final, v, n)
    }
}

/// States at the interval endpoints of a control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    pub states: Vec<BlochVector<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn final_state(&self) -> &BlochVector<S> {
        self.states.last().expect("trajectory has at least one point")
    }

    /// Largest Bloch radius along the trajectory.
    pub fn max_norm(&self) -> S {
        self.states.iter().map(|x| x.norm()).fold(S::zero(), S::max)
    }
}

/// Costates at the interval endpoints of a control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory<S> {
    pub times: Vec<S>,
    pub costates: Vec<AdjointVector<S>>,
}

/// One RK4 step of the Bloch system for fixed controls, as an affine map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMap<S> {
    matrix: Mat3<S>,
    offset: Vec3<S>,
}

fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat_vec<S: Scalar>(a: &Mat3<S>, x: &Vec3<S>) -> Vec3<S> {
    [dot(&a[0], x), dot(&a[1], x), dot(&a[2], x)]
}

/// `I + c z`
fn identity_plus<S: Scalar>(z: &Mat3<S>, c: S) -> Mat3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c * z[i][j];
        }
        out[i][i] = out[i][i] + S::one();
    }
    out
}

impl<S: Scalar> StepMap<S> {
    pub fn rk4(v: S, n: S, params: &SystemParams<S>, h: S) -> Self {
        let field = AffineField::new(v, n, params);
        let mut z = field.matrix;
        for row in z.iter_mut() {
            for c in row.iter_mut() {
                *c = *c * h;
            }
        }
        // Horner forms of R(z) and P(z)
        let r3 = identity_plus(&z, S::lit(0.25));
        let r2 = identity_plus(&mat_mul(&z, &r3), S::one() / S::lit(3.0));
        let r1 = identity_plus(&mat_mul(&z, &r2), S::lit(0.5));
        let matrix = identity_plus(&mat_mul(&z, &r1), S::one());

        let b = field.offset;
        let quarter = S::lit(0.25);
        let third = S::one() / S::lit(3.0);
        let half = S::lit(0.5);
        let zb = mat_vec(&z, &b);
        let u3 = [b[0] + quarter * zb[0], b[1] + quarter * zb[1], b[2] + quarter * zb[2]];
        let zu = mat_vec(&z, &u3);
        let u2 = [b[0] + third * zu[0], b[1] + third * zu[1], b[2] + third * zu[2]];
        let zu = mat_vec(&z, &u2);
        let offset = [
            h * (b[0] + half * zu[0]),
            h * (b[1] + half * zu[1]),
            h * (b[2] + half * zu[2]),
        ];
        Self { matrix, offset }
    }

    #[inline]
    pub fn forward(&self, x: &Vec3<S>) -> Vec3<S> {
        let m = &self.matrix;
        [
            dot(&m[0], x) + self.offset[0],
            dot(&m[1], x) + self.offset[1],
            dot(&m[2], x) + self.offset[2],
        ]
    }

    /// One backward RK4 step of the conjugate system.
    #[inline]
    pub fn backward(&self, p: &Vec3<S>) -> Vec3<S> {
        let m = &self.matrix;
        [
            m[0][0] * p[0] + m[1][0] * p[1] + m[2][0] * p[2],
            m[0][1] * p[0] + m[1][1] * p[1] + m[2][1] * p[2],
            m[0][2] * p[0] + m[1][2] * p[1] + m[2][2] * p[2],
        ]
    }
}

/// Classical RK4 step `x + h/6 (k1 + 2 k2 + 2 k3 + k4)` for an arbitrary field.
pub fn rk4_step<S: Scalar, F>(f: F, x: &Vec3<S>, h: S) -> Vec3<S>
where
    F: Fn(&Vec3<S>) -> Vec3<S>,
{
    let half = S::lit(0.5) * h;
    let stage = |base: &Vec3<S>, k: &Vec3<S>, c: S| [base[0] + c * k[0], base[1] + c * k[1], base[2] + c * k[2]];
    let k1 = f(x);
    let k2 = f(&stage(x, &k1, half));
    let k3 = f(&stage(x, &k2, half));
    let k4 = f(&stage(x, &k3, h));
    let two = S::lit(2.0);
    let sixth = h / S::lit(6.0);
    [
        x[0] + sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
        x[1] + sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
        x[2] + sixth * (k1[2] + two * k2[2] + two * k3[2] + k4[2]),
    ]
}

fn check_substeps(substeps: usize) -> Result<()> {
    if substeps == 0 {
        Err(invalid("substeps", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn non_finite<S: Scalar>(u: &ControlGrid<S>, i: usize) -> Error {
    Error::NonFiniteState {
        time: u.time(i).to_f64().unwrap_or(f64::NAN),
    }
}

/// Walks the grid forward, handing every interval's step map to `visit`.
fn sweep_forward<S: Scalar>(
    x0: &Vec3<S>,
    u: &ControlGrid<S>,
    params: &SystemParams<S>,
    substeps: usize,
    mut visit: impl FnMut(usize, &Vec3<S>),
) -> Result<Vec3<S>> {
    check_substeps(substeps)?;
    let h = u.dt() / S::count(substeps);
    let mut x = *x0;
    for (i, (&v, &n)) in u.v.iter().zip(&u.n).enumerate() {
        let map = StepMap::rk4(v, n, params, h);
        for _ in 0..substeps {
            x = map.forward(&x);
            visit(i, &x);
        }
        if !is_finite3(&x) {
            return Err(non_finite(u, i + 1));
        }
    }
    Ok(x)
}

/// Integrates the Bloch system and records the state at every interval endpoint.
pub fn integrate_forward<S: Scalar>(
    x0: &BlochVector<S>,
    u: &ControlGrid<S>,
    params: &SystemParams<S>,
    substeps: usize,
) -> Result<Trajectory<S>> {
    let mut states = Vec::with_capacity(u.intervals() + 1);
    states.push(*x0);
    let mut count = 0;
    sweep_forward(x0.as_array(), u, params, substeps, |_, x| {
        count += 1;
        if count % substeps == 0 {
            states.push(BlochVector::from_array_unchecked(*x));
        }
    })?;
    let times = (0..=u.intervals()).map(|i| u.time(i)).collect();
    Ok(Trajectory { times, states })
}

/// Final state only; the cheap path used inside line searches.
pub fn final_state<S: Scalar>(
    x0: &BlochVector<S>,
    u: &ControlGrid<S>,
    params: &SystemParams<S>,
    substeps: usize,
) -> Result<BlochVector<S>> {
    sweep_forward(x0.as_array(), u, params, substeps, |_, _| {}).map(BlochVector::from_array_unchecked)
}

/// Every RK4 node: `intervals * substeps + 1` states.
pub(crate) fn dense_forward<S: Scalar>(
    x0: &BlochVector<S>,
    u: &ControlGrid<S>,
    params: &SystemParams<S>,
    substeps: usize,
) -> Result<Vec<Vec3<S>>> {
    let mut nodes = Vec::with_capacity(u.intervals() * substeps + 1);
    nodes.push(*x0.as_array());
    sweep_forward(x0.as_array(), u, params, substeps, |_, x| nodes.push(*x))?;
    Ok(nodes)
}

/// Integrates the conjugate system backward from `p(T) = p_final`.
pub fn integrate_adjoint<S: Scalar>(
    p_final: &AdjointVector<S>,
    u: &ControlGrid<S>,
    params: &SystemParams<S>,
    substeps: usize,
) -> Result<AdjointTrajectory<S>> {
    check_substeps(substeps)?;
    let h = u.dt() / S::count(substeps);
    let intervals = u.intervals();
    let mut costates = vec![AdjointVector::zero(); intervals + 1];
    let mut p = *p_final.as_array();
    costates[intervals] = *p_final;
    for i in (0..intervals).rev() {
        let map = StepMap::rk4(u.v[i], u.n[i], params, h);
        for _ in 0..substeps {
            p = map.backward(&p);
        }
        if !is_finite3(&p) {
            return Err(non_finite(u, i));
        }
        costates[i] = AdjointVector::from_array_unchecked(p);
    }
    let times = (0..=intervals).map(|i| u.time(i)).collect();
    Ok(AdjointTrajectory { times, costates })
}

/// Squared distance `|x(T) - x_target|^2`.
pub fn cost<S: Scalar>(traj: &Trajectory<S>, x_target: &BlochVector<S>) -> S {
    terminal_cost(traj.final_state(), x_target)
}

pub fn terminal_cost<S: Scalar>(x_final: &BlochVector<S>, x_target: &BlochVector<S>) -> S {
    let (a, b) = (x_final.as_array(), x_target.as_array());
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{adjoint_field, bloch_field};

    fn paper() -> SystemParams<f64> {
        SystemParams::new(1.0, 2e-3, 1e-2).unwrap()
    }

    #[test]
    fn step_map_equals_direct_rk4() {
        let p = paper();
        let h = 0.05;
        for (v, n) in [(0.0, 0.0), (10.0, 1.0), (-7.3, 0.4)] {
            let map = StepMap::rk4(v, n, &p, h);
            let x = [0.3, -0.6, 0.2];
            let direct = rk4_step(|y| bloch_field(y, v, n, &p), &x, h);
            let mapped = map.forward(&x);
            for k in 0..3 {
                assert!((direct[k] - mapped[k]).abs() < 1e-15);
            }
            // backward costate step = RK4 on the negated field with step h
            let q = [1.2, -0.4, 0.9];
            let direct = rk4_step(|y| adjoint_field(y, v, n, &p).map(|c| -c), &q, h);
            let mapped = map.backward(&q);
            for k in 0..3 {
                assert!((direct[k] - mapped[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let x0 = BlochVector::new(0.0, 0.0, 1.0).unwrap();
        let u = ControlGrid::constant(123.0, 40, 0.0, 0.0).unwrap();
        let traj = integrate_forward(&x0, &u, &paper(), 10).unwrap();
        assert_eq!(traj.states.len(), 41);
        for s in &traj.states {
            assert_eq!(*s.as_array(), [0.0, 0.0, 1.0]);
        }
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(traj.times[40], 123.0);
    }

    #[test]
    fn free_decay_of_population() {
        let p = paper();
        let x0 = BlochVector::new(0.0, 0.0, -1.0).unwrap();
        let u = ControlGrid::constant(400.0, 1600, 0.0, 0.0).unwrap();
        let traj = integrate_forward(&x0, &u, &p, default_substeps(u.dt())).unwrap();
        let expected = 1.0 - 2.0 * (-0.8f64).exp();
        let last = traj.final_state();
        assert!((last.x3() - expected).abs() < 1e-8);
        assert_eq!(last.x1(), 0.0);
        assert_eq!(last.x2(), 0.0);
        let target = BlochVector::new(0.0, 0.0, 0.5).unwrap();
        assert!((cost(&traj, &target) - (expected - 0.5).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn free_rotation_decay() {
        let p = paper();
        let x0 = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let period = 2.0 * std::f64::consts::PI;
        let u = ControlGrid::constant(period, 64, 0.0, 0.0).unwrap();
        let traj = integrate_forward(&x0, &u, &p, default_substeps(u.dt())).unwrap();
        let last = traj.final_state();
        let expected = (-std::f64::consts::PI * 2e-3).exp();
        assert!((last.x1() - expected).abs() < 1e-8);
        assert!(last.x2().abs() < 1e-8);
    }

    #[test]
    fn adjoint_closed_forms() {
        let p = paper();
        let t = 300.0;
        let u = ControlGrid::constant(t, 1200, 0.0, 0.0).unwrap();
        let s = default_substeps(u.dt());

        let zero = integrate_adjoint(&AdjointVector::zero(), &u, &p, s).unwrap();
        assert!(zero.costates.iter().all(|q| *q.as_array() == [0.0; 3]));

        let e3 = integrate_adjoint(&AdjointVector::new(0.0, 0.0, 1.0).unwrap(), &u, &p, s).unwrap();
        assert!((e3.costates[0].as_array()[2] - (-2e-3 * t).exp()).abs() < 1e-10);

        let e1 = integrate_adjoint(&AdjointVector::new(1.0, 0.0, 0.0).unwrap(), &u, &p, s).unwrap();
        for (time, q) in e1.times.iter().zip(&e1.costates).step_by(97) {
            // p1 + i p2 = exp((gamma/2 - i omega)(t - T))
            let tau = time - t;
            let mag = (1e-3 * tau).exp();
            assert!((q.as_array()[0] - mag * tau.cos()).abs() < 1e-8);
            assert!((q.as_array()[1] + mag * tau.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn resample_uses_absolute_time() {
        let u = ControlGrid::new(4.0, vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        let shorter = u.resample(2.0, 4).unwrap();
        assert_eq!(shorter.v(), &[1.0, 1.0, 2.0, 2.0]);
        let longer = u.resample(6.0, 3).unwrap();
        assert_eq!(longer.v(), &[2.0, 4.0, 4.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(ControlGrid::<f64>::new(0.0, vec![0.0], vec![0.0]).is_err());
        assert!(ControlGrid::<f64>::new(1.0, vec![], vec![]).is_err());
        assert!(ControlGrid::<f64>::new(1.0, vec![0.0], vec![0.0, 1.0]).is_err());
        let u = ControlGrid::constant(1.0, 2, 0.0, 0.0).unwrap();
        let x0 = BlochVector::origin();
        assert!(integrate_forward(&x0, &u, &paper(), 0).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let x0 = BlochVector::new(0.0, 0.0, -1.0).unwrap();
        let u = ControlGrid::constant(1.0, 4, 0.0, 1e300).unwrap();
        let err = integrate_forward(&x0, &u, &paper(), 4).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }
}
