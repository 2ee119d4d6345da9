//! Density matrices of a two-level system and their Bloch-ball coordinates.
//!
//! A state is stored either as the 2x2 complex matrix
//! `rho = 1/2 (I + x1 s1 + x2 s2 + x3 s3)` or as the real vector `x`.
//! The matrix-level master equation lives here as well; it is never used by
//! the optimizer and serves as an independent check on the Bloch equations.

use std::fmt;

use num_complex::Complex;

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Vec3};

/// Row-major complex 2x2 matrix.
pub type Mat2<S> = [[Complex<S>; 2]; 2];

/// Point of the closed unit ball in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector<S> {
    x: Vec3<S>,
}

impl<S: Scalar> BlochVector<S> {
    /// Builds a Bloch vector, rejecting points outside the unit ball.
    pub fn new(x1: S, x2: S, x3: S) -> Result<Self> {
        Self::try_from_array([x1, x2, x3])
    }

    pub fn try_from_array(x: Vec3<S>) -> Result<Self> {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if !(norm <= S::one() + S::BALL_TOL) {
            return Err(Error::OutsideBlochBall {
                norm: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { x })
    }

    /// Wraps integrator output without the ball check.
    pub(crate) fn from_array_unchecked(x: Vec3<S>) -> Self {
        Self { x }
    }

    pub fn origin() -> Self {
        Self { x: [S::zero(); 3] }
    }

    pub fn x1(&self) -> S {
        self.x[0]
    }

    pub fn x2(&self) -> S {
        self.x[1]
    }

    pub fn x3(&self) -> S {
        self.x[2]
    }

    pub fn as_array(&self) -> &Vec3<S> {
        &self.x
    }

    pub fn norm(&self) -> S {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> S {
        self.x.iter().map(|&c| c * c).sum()
    }
}

/// Per-invariant residuals of a candidate density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    /// max |rho_ij - conj(rho_ji)|
    pub hermiticity_residual: f64,
    /// |Tr rho - 1|
    pub trace_residual: f64,
    /// det rho computed from the Hermitian part
    pub determinant: f64,
    pub hermitian: bool,
    pub unit_trace: bool,
    pub positive: bool,
}

impl DensityReport {
    pub fn is_valid(&self) -> bool {
        self.hermitian && self.unit_trace && self.positive
    }
}

impl fmt::Display for DensityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        write!(
            f,
            "hermiticity {} (residual {:e}), trace {} (residual {:e}), positivity {} (det {:e})",
            mark(self.hermitian),
            self.hermiticity_residual,
            mark(self.unit_trace),
            self.trace_residual,
            mark(self.positive),
            self.determinant
        )
    }
}

/// Checks hermiticity, unit trace and positivity of a 2x2 complex matrix.
///
/// Positivity of a Hermitian unit-trace 2x2 matrix is equivalent to a
/// non-negative determinant, so no eigensolver is needed.
pub fn validate_density<S: Scalar>(m: &Mat2<S>) -> DensityReport {
    let tol = S::DENSITY_TOL;
    let herm = [
        (m[0][0] - m[0][0].conj()).norm(),
        (m[1][1] - m[1][1].conj()).norm(),
        (m[0][1] - m[1][0].conj()).norm(),
    ]
    .into_iter()
    .fold(S::zero(), S::max);
    let trace = m[0][0] + m[1][1];
    let trace_residual = (trace - Complex::new(S::one(), S::zero())).norm();
    let off = (m[0][1] + m[1][0].conj()) * S::lit(0.5);
    let det = m[0][0].re * m[1][1].re - off.norm_sqr();
    let to64 = |s: S| s.to_f64().unwrap_or(f64::NAN);
    DensityReport {
        hermiticity_residual: to64(herm),
        trace_residual: to64(trace_residual),
        determinant: to64(det),
        hermitian: herm <= tol,
        unit_trace: trace_residual <= tol,
        positive: det >= -tol,
    }
}

/// Validated density matrix of a two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<S> {
    elements: Mat2<S>,
}

impl<S: Scalar> DensityMatrix<S> {
    pub fn new(elements: Mat2<S>) -> Result<Self> {
        let report = validate_density(&elements);
        if report.is_valid() {
            Ok(Self { elements })
        } else {
            Err(Error::InvalidDensity(report))
        }
    }

    pub fn elements(&self) -> &Mat2<S> {
        &self.elements
    }

    /// Real diagonal matrix `diag(a, b)`.
    pub fn diagonal(a: S, b: S) -> Result<Self> {
        let z = Complex::new(S::zero(), S::zero());
        Self::new([[Complex::new(a, S::zero()), z], [z, Complex::new(b, S::zero())]])
    }
}

/// Bloch coordinates `x_i = Tr(rho sigma_i)`.
pub fn bloch_from_density<S: Scalar>(rho: &DensityMatrix<S>) -> Result<BlochVector<S>> {
    let m = rho.elements();
    let report = validate_density(m);
    if !report.is_valid() {
        return Err(Error::InvalidDensity(report));
    }
    // Tr(rho s1) = rho01 + rho10, Tr(rho s2) = i (rho01 - rho10), Tr(rho s3) = rho00 - rho11
    let x1 = (m[0][1] + m[1][0]).re;
    let x2 = -(m[0][1] - m[1][0]).im;
    let x3 = (m[0][0] - m[1][1]).re;
    BlochVector::new(x1, x2, x3)
}

/// `rho = 1/2 [[1 + x3, x1 - i x2], [x1 + i x2, 1 - x3]]`.
pub fn density_from_bloch<S: Scalar>(x: &BlochVector<S>) -> Result<DensityMatrix<S>> {
    if !(x.norm() <= S::one() + S::BALL_TOL) {
        return Err(Error::OutsideBlochBall {
            norm: x.norm().to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = S::lit(0.5);
    let [x1, x2, x3] = *x.as_array();
    let elements = [
        [
            Complex::new(half * (S::one() + x3), S::zero()),
            Complex::new(half * x1, -half * x2),
        ],
        [
            Complex::new(half * x1, half * x2),
            Complex::new(half * (S::one() - x3), S::zero()),
        ],
    ];
    // Points at most BALL_TOL outside the sphere give det of order -BALL_TOL;
    // they are admitted because the ball check above already accepted them.
    Ok(DensityMatrix { elements })
}

fn zero<S: Scalar>() -> Complex<S> {
    Complex::new(S::zero(), S::zero())
}

fn mul<S: Scalar>(a: &Mat2<S>, b: &Mat2<S>) -> Mat2<S> {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn combine<S: Scalar>(a: &Mat2<S>, ca: Complex<S>, b: &Mat2<S>, cb: Complex<S>) -> Mat2<S> {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] * ca + b[i][j] * cb;
        }
    }
    out
}

fn real<S: Scalar>(m: [[f64; 2]; 2]) -> Mat2<S> {
    let c = |v: f64| Complex::new(S::lit(v), S::zero());
    [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]]
}

/// Right-hand side of the master equation
/// `d rho/dt = -i [H0/hbar + (V/hbar) v, rho] + gamma D(rho, n)`
/// with `H0/hbar = omega diag(0, 1)` and `V/hbar = kappa sigma_1`.
pub fn master_rhs_density<S: Scalar>(
    rho: &DensityMatrix<S>,
    v: S,
    n: S,
    params: &SystemParams<S>,
) -> Result<Mat2<S>> {
    if n < S::zero() {
        return Err(Error::NegativeIncoherentControl(n.to_f64().unwrap_or(f64::NAN)));
    }
    let r = rho.elements();
    let one = Complex::new(S::one(), S::zero());
    let i = Complex::new(S::zero(), S::one());

    let h0 = real::<S>([[0.0, 0.0], [0.0, 1.0]]);
    let s1 = real::<S>([[0.0, 1.0], [1.0, 0.0]]);
    let h = combine(
        &h0,
        Complex::new(params.omega(), S::zero()),
        &s1,
        Complex::new(params.kappa() * v, S::zero()),
    );
    let commutator = combine(&mul(&h, r), one, &mul(r, &h), -one);
    let coherent = combine(&commutator, -i, &commutator, zero());

    let sp = real::<S>([[0.0, 1.0], [0.0, 0.0]]);
    let sm = real::<S>([[0.0, 0.0], [1.0, 0.0]]);
    let sm_sp = mul(&sm, &sp);
    let sp_sm = mul(&sp, &sm);
    let anti = |a: &Mat2<S>| combine(&mul(a, r), one, &mul(r, a), one);
    let half = Complex::new(S::lit(0.5), S::zero());

    // sigma+ rho sigma- - 1/2 {sigma- sigma+, rho}
    let emission = combine(&mul(&mul(&sp, r), &sm), one, &anti(&sm_sp), -half);
    // sigma+ rho sigma- + sigma- rho sigma+ - 1/2 {sigma- sigma+ + sigma+ sigma-, rho}
    let jumps = combine(&mul(&mul(&sp, r), &sm), one, &mul(&mul(&sm, r), &sp), one);
    let both = combine(&anti(&sm_sp), one, &anti(&sp_sm), one);
    let thermal = combine(&jumps, one, &both, -half);

    let dissipator = combine(&thermal, Complex::new(n, S::zero()), &emission, one);
    Ok(combine(
        &coherent,
        one,
        &dissipator,
        Complex::new(params.gamma(), S::zero()),
    ))
}

/// Pauli-basis coordinates `Tr(m sigma_i)` of an arbitrary 2x2 matrix.
///
/// Unlike [`bloch_from_density`] this applies no validation, so it also maps
/// traceless derivatives such as the output of [`master_rhs_density`].
pub fn pauli_coordinates<S: Scalar>(m: &Mat2<S>) -> Vec3<S> {
    [
        (m[0][1] + m[1][0]).re,
        -(m[0][1] - m[1][0]).im,
        (m[0][0] - m[1][1]).re,
    ]
}
