//! Floating-point abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the solvers are generic over (`f32` or `f64`).
///
/// The associated tolerances are absolute thresholds used by the simplex
/// kernel; they are tied to the precision of the type rather than to any
/// particular problem.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Sum + 'static
{
    /// Smallest magnitude accepted as a simplex pivot element.
    const PIVOT_TOL: f64;
    /// Reduced-cost threshold below which a column is considered improving.
    const OPT_TOL: f64;
    /// Primal feasibility tolerance (constraint rows, bounds, integrality).
    const FEAS_TOL: f64;

    /// Converts an `f64` literal. Panics only on values the type cannot
    /// represent at all, which never happens for `f32`/`f64`.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("scalar literal out of range")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar is representable as f64")
    }

    fn pivot_tol() -> Self {
        Self::lit(Self::PIVOT_TOL)
    }

    fn opt_tol() -> Self {
        Self::lit(Self::OPT_TOL)
    }

    fn feas_tol() -> Self {
        Self::lit(Self::FEAS_TOL)
    }

    /// Slack used when comparing objective values that should be equal up
    /// to accumulated rounding.
    fn rel_tie(reference: Self) -> Self {
        Self::lit(64.0) * Self::epsilon() * (Self::one() + reference.abs())
    }
}

impl Scalar for f64 {
    const PIVOT_TOL: f64 = 1e-9;
    const OPT_TOL: f64 = 1e-10;
    const FEAS_TOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const PIVOT_TOL: f64 = 1e-5;
    const OPT_TOL: f64 = 1e-5;
    const FEAS_TOL: f64 = 1e-4;
}

/// Neumaier-compensated accumulator.
///
/// The bisection branches on the sign of a sum over all agents, so the
/// coupling value is always accumulated through this type.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a sequence.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    values.into_iter().collect::<CompensatedSum<T>>().value()
}

/// Compensated dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}
