//! Controlled Bloch equations, the conjugate (costate) system, switching
//! functions and the Pontryagin function.
//!
//! Controls are taken at face value here: values outside the admissible box
//! are not clamped. Bound enforcement happens only in the optimizer's
//! projection step.

use crate::error::{invalid, Result};
use crate::scalar::{dot, Mat3, Scalar, Vec3};
use crate::state::BlochVector;

/// Model constants: transition frequency `omega`, dissipation strength
/// `gamma` and coherent coupling `kappa = mu / hbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<S> {
    omega: S,
    gamma: S,
    kappa: S,
}

impl<S: Scalar> SystemParams<S> {
    pub fn new(omega: S, gamma: S, kappa: S) -> Result<Self> {
        if !(omega > S::zero() && omega.is_finite()) {
            return Err(invalid("omega", format!("must be positive and finite, got {omega}")));
        }
        if !(gamma > S::zero() && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive and finite, got {gamma}")));
        }
        if !(kappa != S::zero() && kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be non-zero and finite, got {kappa}")));
        }
        Ok(Self { omega, gamma, kappa })
    }

    pub fn omega(&self) -> S {
        self.omega
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn kappa(&self) -> S {
        self.kappa
    }
}

/// Admissible box `[v_min, v_max] x [0, n_max]` for the control pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds<S> {
    v_min: S,
    v_max: S,
    n_max: S,
}

impl<S: Scalar> ControlBounds<S> {
    pub fn new(v_min: S, v_max: S, n_max: S) -> Result<Self> {
        if !(v_min.is_finite() && v_max.is_finite()) {
            return Err(invalid("v_min", "coherent bounds must be finite"));
        }
        if v_min > v_max {
            return Err(invalid("v_min", format!("v_min = {v_min} exceeds v_max = {v_max}")));
        }
        if !(n_max >= S::zero() && n_max.is_finite()) {
            return Err(invalid("n_max", format!("must be non-negative and finite, got {n_max}")));
        }
        Ok(Self { v_min, v_max, n_max })
    }

    pub fn v_min(&self) -> S {
        self.v_min
    }

    pub fn v_max(&self) -> S {
        self.v_max
    }

    pub fn n_max(&self) -> S {
        self.n_max
    }

    pub fn clamp_v(&self, v: S) -> S {
        v.max(self.v_min).min(self.v_max)
    }

    pub fn clamp_n(&self, n: S) -> S {
        n.max(S::zero()).min(self.n_max)
    }

    pub fn contains(&self, v: S, n: S) -> bool {
        v >= self.v_min && v <= self.v_max && n >= S::zero() && n <= self.n_max
    }
}

/// Costate of the Bloch system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdjointVector<S> {
    p: Vec3<S>,
}

impl<S: Scalar> AdjointVector<S> {
    pub fn new(p1: S, p2: S, p3: S) -> Result<Self> {
        Self::try_from_array([p1, p2, p3])
    }

    pub fn try_from_array(p: Vec3<S>) -> Result<Self> {
        if p.iter().all(|c| c.is_finite()) {
            Ok(Self { p })
        } else {
            Err(invalid("costate", "components must be finite"))
        }
    }

    pub(crate) fn from_array_unchecked(p: Vec3<S>) -> Self {
        Self { p }
    }

    pub fn zero() -> Self {
        Self { p: [S::zero(); 3] }
    }

    pub fn as_array(&self) -> &Vec3<S> {
        &self.p
    }
}

pub(crate) fn bloch_field<S: Scalar>(x: &Vec3<S>, v: S, n: S, params: &SystemParams<S>) -> Vec3<S> {
    let SystemParams { omega, gamma, kappa } = *params;
    let half_gamma = gamma * S::lit(0.5);
    let two = S::lit(2.0);
    let [x1, x2, x3] = *x;
    [
        -half_gamma * x1 + omega * x2 - gamma * x1 * n,
        -omega * x1 - half_gamma * x2 - two * kappa * x3 * v - gamma * x2 * n,
        two * kappa * x2 * v - gamma * x3 + gamma - two * gamma * x3 * n,
    ]
}

pub(crate) fn adjoint_field<S: Scalar>(p: &Vec3<S>, v: S, n: S, params: &SystemParams<S>) -> Vec3<S> {
    let SystemParams { omega, gamma, kappa } = *params;
    let half_gamma = gamma * S::lit(0.5);
    let two = S::lit(2.0);
    let [p1, p2, p3] = *p;
    [
        half_gamma * p1 + gamma * p1 * n + omega * p2,
        -omega * p1 + half_gamma * p2 + gamma * p2 * n - two * kappa * p3 * v,
        two * kappa * p2 * v + gamma * p3 + two * gamma * p3 * n,
    ]
}

#[inline]
pub(crate) fn switching<S: Scalar>(p: &Vec3<S>, x: &Vec3<S>, params: &SystemParams<S>) -> (S, S) {
    let two = S::lit(2.0);
    let kv = two * params.kappa * (p[2] * x[1] - p[1] * x[2]);
    let kn = -params.gamma * (p[0] * x[0] + p[1] * x[1] + two * p[2] * x[2]);
    (kv, kn)
}

/// Bloch equations `dx/dt` for controls `(v, n)`.
pub fn bloch_rhs<S: Scalar>(x: &BlochVector<S>, v: S, n: S, params: &SystemParams<S>) -> Vec3<S> {
    bloch_field(x.as_array(), v, n, params)
}

/// Conjugate system `dp/dt`; independent of the state.
pub fn adjoint_rhs<S: Scalar>(p: &AdjointVector<S>, v: S, n: S, params: &SystemParams<S>) -> Vec3<S> {
    adjoint_field(p.as_array(), v, n, params)
}

/// Switching functions `(K_v, K_n) = (dH/dv, dH/dn)`.
pub fn switching_functions<S: Scalar>(
    p: &AdjointVector<S>,
    x: &BlochVector<S>,
    params: &SystemParams<S>,
) -> (S, S) {
    switching(p.as_array(), x.as_array(), params)
}

/// Costate at the final time for the cost `|x(T) - x_target|^2`.
pub fn terminal_adjoint<S: Scalar>(x_final: &BlochVector<S>, x_target: &BlochVector<S>) -> AdjointVector<S> {
    let two = S::lit(2.0);
    let (a, b) = (x_final.as_array(), x_target.as_array());
    AdjointVector::from_array_unchecked([
        -two * (a[0] - b[0]),
        -two * (a[1] - b[1]),
        -two * (a[2] - b[2]),
    ])
}

/// Pontryagin function `H = K_v v + K_n n + H~(p, x)`.
pub fn pontryagin_h<S: Scalar>(
    p: &AdjointVector<S>,
    x: &BlochVector<S>,
    v: S,
    n: S,
    params: &SystemParams<S>,
) -> S {
    let (kv, kn) = switching_functions(p, x, params);
    let SystemParams { omega, gamma, .. } = *params;
    let half_gamma = gamma * S::lit(0.5);
    let [p1, p2, p3] = *p.as_array();
    let [x1, x2, x3] = *x.as_array();
    let drift = p1 * (-half_gamma * x1 + omega * x2)
        + p2 * (-omega * x1 - half_gamma * x2)
        + p3 * (gamma - gamma * x3);
    kv * v + kn * n + drift
}

/// Bloch equations written as `dx/dt = A x + b` for fixed controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineField<S> {
    pub matrix: Mat3<S>,
    pub offset: Vec3<S>,
}

impl<S: Scalar> AffineField<S> {
    pub fn new(v: S, n: S, params: &SystemParams<S>) -> Self {
        let SystemParams { omega, gamma, kappa } = *params;
        let z = S::zero();
        let two = S::lit(2.0);
        let damp = gamma * (S::lit(0.5) + n);
        let drive = two * kappa * v;
        Self {
            matrix: [
                [-damp, omega, z],
                [-omega, -damp, -drive],
                [z, drive, -gamma * (S::one() + two * n)],
            ],
            offset: [z, z, gamma],
        }
    }

    pub fn apply(&self, x: &Vec3<S>) -> Vec3<S> {
        let m = &self.matrix;
        [
            dot(&m[0], x) + self.offset[0],
            dot(&m[1], x) + self.offset[1],
            dot(&m[2], x) + self.offset[2],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> SystemParams<f64> {
        SystemParams::new(1.0, 2e-3, 1e-2).unwrap()
    }

    fn bv(x1: f64, x2: f64, x3: f64) -> BlochVector<f64> {
        BlochVector::new(x1, x2, x3).unwrap()
    }

    fn close(a: &[f64; 3], b: &[f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn bloch_rhs_reference_values() {
        let p = paper();
        assert_eq!(bloch_rhs(&bv(0.0, 0.0, 1.0), 0.0, 0.0, &p), [0.0, 0.0, 0.0]);
        assert!(close(&bloch_rhs(&bv(0.0, 0.0, -1.0), 0.0, 0.0, &p), &[0.0, 0.0, 4e-3], 1e-18));
        assert!(close(&bloch_rhs(&bv(1.0, 0.0, 0.0), 0.0, 0.0, &p), &[-1e-3, -1.0, 2e-3], 1e-18));
    }

    #[test]
    fn adjoint_rhs_reference_values() {
        let p = paper();
        let zero = AdjointVector::zero();
        assert_eq!(adjoint_rhs(&zero, 7.0, 0.3, &p), [0.0; 3]);
        let e3 = AdjointVector::new(0.0, 0.0, 1.0).unwrap();
        assert!(close(&adjoint_rhs(&e3, 0.0, 0.0, &p), &[0.0, 0.0, 2e-3], 1e-18));
        let e1 = AdjointVector::new(1.0, 0.0, 0.0).unwrap();
        assert!(close(&adjoint_rhs(&e1, 0.0, 1.0, &p), &[3e-3, -1.0, 0.0], 1e-18));
    }

    #[test]
    fn switching_reference_values() {
        let p = paper();
        let x = bv(0.3, -0.2, 0.4);
        let same = AdjointVector::new(0.3, -0.2, 0.4).unwrap();
        assert_eq!(switching_functions(&same, &x, &p).0, 0.0);

        let (kv, _) = switching_functions(&AdjointVector::new(0.0, 0.0, 1.0).unwrap(), &bv(0.0, 1.0, 0.0), &p);
        assert!((kv - 2e-2).abs() < 1e-18);

        // (1, 1, 1) lies outside the ball; switching functions do not care
        let ones = BlochVector::from_array_unchecked([1.0, 1.0, 1.0]);
        let (_, kn) = switching_functions(&AdjointVector::new(1.0, 1.0, 1.0).unwrap(), &ones, &p);
        assert!((kn + 8e-3).abs() < 1e-18);
    }

    #[test]
    fn terminal_adjoint_reference_values() {
        let t = bv(0.0, 0.0, 0.5);
        assert_eq!(*terminal_adjoint(&t, &t).as_array(), [0.0, 0.0, 0.0]);
        assert_eq!(*terminal_adjoint(&bv(0.0, 0.0, 1.0), &t).as_array(), [0.0, 0.0, -1.0]);
        assert_eq!(
            *terminal_adjoint(&bv(0.0, -1.0, 0.0), &BlochVector::origin()).as_array(),
            [0.0, 2.0, 0.0]
        );
    }

    #[test]
    fn pontryagin_reference_values() {
        let p = paper();
        assert_eq!(pontryagin_h(&AdjointVector::zero(), &bv(0.1, 0.2, 0.3), 5.0, 0.5, &p), 0.0);
        let h = pontryagin_h(&AdjointVector::new(0.0, 0.0, 1.0).unwrap(), &bv(0.0, 0.0, 1.0), 0.0, 0.0, &p);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn affine_form_matches_bloch_rhs() {
        let p = paper();
        let x = [0.2, -0.5, 0.7];
        for (v, n) in [(0.0, 0.0), (-10.0, 1.0), (3.5, 0.25)] {
            let a = AffineField::new(v, n, &p).apply(&x);
            let b = bloch_field(&x, v, n, &p);
            assert!(close(&a, &b, 1e-15));
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(SystemParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, -1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 0.0).is_err());
        assert!(ControlBounds::new(1.0, -1.0, 1.0).is_err());
        assert!(ControlBounds::new(-1.0, 1.0, -0.1).is_err());
        assert!(AdjointVector::new(f64::NAN, 0.0, 0.0).is_err());
        let b = ControlBounds::new(-10.0, 10.0, 1.0).unwrap();
        assert_eq!(b.clamp_v(15.0), 10.0);
        assert_eq!(b.clamp_n(-0.5), 0.0);
        assert!(b.contains(3.0, 0.7));
    }
}
