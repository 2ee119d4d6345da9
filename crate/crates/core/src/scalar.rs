//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating point type the dynamics and optimizer are written against.
///
/// The associated tolerances are the validation thresholds used throughout
/// the crate; they scale with the precision of the type.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Hermiticity, trace and positivity tolerance for density matrices.
    const DENSITY_TOL: Self;
    /// Slack allowed on the Bloch ball radius for state inputs.
    const BALL_TOL: Self;
    /// Slack allowed on the Bloch ball radius along integrated trajectories.
    const TRAJECTORY_BALL_TOL: Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    const DENSITY_TOL: f64 = 1e-12;
    const BALL_TOL: f64 = 1e-9;
    const TRAJECTORY_BALL_TOL: f64 = 1e-6;
}

impl Scalar for f32 {
    const DENSITY_TOL: f32 = 1e-5;
    const BALL_TOL: f32 = 1e-5;
    const TRAJECTORY_BALL_TOL: f32 = 1e-3;
}

/// Plain real 3-vector used for right-hand sides and intermediate stages.
pub type Vec3<S> = [S; 3];

/// Row-major real 3x3 matrix.
pub type Mat3<S> = [[S; 3]; 3];

#[inline]
pub(crate) fn dot<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn is_finite3<S: Scalar>(a: &Vec3<S>) -> bool {
    a.iter().all(|c| c.is_finite())
}
