//! Oracle contract for problems with one scalar complicating constraint.
//!
//! A problem `min f(x) s.t. v(x) <= 0, x in X` is presented to the solvers
//! only through its Lagrangian minimizer `lambda -> argmin_X f + lambda v`.
//! Everything else (dual values, warm starts, bisection) is built on top.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point of `X` together with its cost and constraint value.
///
/// `v_val < 0` means slack, `v_val > 0` means violation. Both values are
/// produced by the owning problem's evaluation routine, so re-evaluating
/// `x` reproduces them bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint<T> {
    pub x: Vec<T>,
    pub f_val: T,
    pub v_val: T,
}

impl<T: Scalar> PrimalPoint<T> {
    pub fn new(x: Vec<T>, f_val: T, v_val: T) -> Self {
        Self { x, f_val, v_val }
    }

    /// `f(x) + lambda v(x)`.
    pub fn lagrangian(&self, lambda: T) -> T {
        self.f_val + lambda * self.v_val
    }

    pub fn is_feasible(&self) -> bool {
        self.v_val <= T::zero()
    }
}

/// How an oracle picks among several minimizers of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    /// First minimizer in a fixed candidate order.
    LowestIndex,
    /// First optimum met by depth-first branch-and-bound, down branch first,
    /// with lowest-index pivoting inside each LP.
    DepthFirstDownBranch,
    /// First optimum in lexicographic enumeration of integer assignments.
    LexicographicEnumeration,
}

/// Lagrangian minimization oracle.
///
/// Implementations must be deterministic for a fixed `lambda` and safe to
/// call from several threads at once.
pub trait LagrangianOracle<T: Scalar>: Sync {
    /// Returns some `x_lambda` in `argmin_{x in X} f(x) + lambda v(x)`.
    fn minimize(&self, lambda: T) -> Result<PrimalPoint<T>>;

    fn tie_break(&self) -> TieBreak;
}

impl<T: Scalar, O: LagrangianOracle<T> + ?Sized> LagrangianOracle<T> for &O {
    fn minimize(&self, lambda: T) -> Result<PrimalPoint<T>> {
        (**self).minimize(lambda)
    }

    fn tie_break(&self) -> TieBreak {
        (**self).tie_break()
    }
}

/// Value of the dual function at `lambda` with the minimizer that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEvaluation<T> {
    pub lambda: T,
    pub phi: T,
    pub witness: PrimalPoint<T>,
}

/// Evaluates `phi(lambda) = min_X f + lambda v`.
pub fn evaluate_dual<T: Scalar, O: LagrangianOracle<T> + ?Sized>(
    oracle: &O,
    lambda: T,
) -> Result<DualEvaluation<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "multiplier must be finite and nonnegative, got {lambda}"
        )));
    }
    let witness = oracle.minimize(lambda)?;
    let phi = witness.lagrangian(lambda);
    if !phi.is_finite() {
        return Err(Error::OracleFailure(format!(
            "non-finite Lagrangian value at lambda = {lambda}"
        )));
    }
    Ok(DualEvaluation {
        lambda,
        phi,
        witness,
    })
}

/// Dual function of an oracle with a write-once cache for `phi(0)`.
pub struct DualFunction<'o, T, O: ?Sized> {
    oracle: &'o O,
    at_zero: OnceLock<DualEvaluation<T>>,
}

impl<'o, T: Scalar, O: LagrangianOracle<T> + ?Sized> DualFunction<'o, T, O> {
    pub fn new(oracle: &'o O) -> Self {
        Self {
            oracle,
            at_zero: OnceLock::new(),
        }
    }

    pub fn oracle(&self) -> &'o O {
        self.oracle
    }

    pub fn evaluate(&self, lambda: T) -> Result<DualEvaluation<T>> {
        if lambda == T::zero() {
            return self.at_zero().cloned();
        }
        evaluate_dual(self.oracle, lambda)
    }

    /// `phi(0)`, i.e. the unconstrained minimum of `f` over `X`.
    pub fn at_zero(&self) -> Result<&DualEvaluation<T>> {
        if let Some(cached) = self.at_zero.get() {
            return Ok(cached);
        }
        let fresh = evaluate_dual(self.oracle, T::zero())?;
        // A concurrent caller may have won the race; its value is identical.
        let _ = self.at_zero.set(fresh);
        Ok(self.at_zero.get().expect("cache was just filled"))
    }

    /// Multiplier that makes the doubling phase of the bisection vacuous.
    ///
    /// Given a strictly feasible `x_tilde`, every dual optimum lies strictly
    /// below `(phi(0) - f(x_tilde)) / v(x_tilde)`. If the unconstrained
    /// minimizer at `lambda = 0` is already feasible, zero is a dual optimum
    /// and the constraint is redundant; that is reported as a nonpositive
    /// reference multiplier instead of a number.
    pub fn warm_start_lambda_ref(&self, x_tilde: &PrimalPoint<T>) -> Result<T> {
        warm_start_lambda_ref(self, x_tilde)
    }
}

/// See [`DualFunction::warm_start_lambda_ref`].
pub fn warm_start_lambda_ref<T: Scalar, O: LagrangianOracle<T> + ?Sized>(
    dual: &DualFunction<'_, T, O>,
    x_tilde: &PrimalPoint<T>,
) -> Result<T> {
    if !(x_tilde.v_val < T::zero()) {
        return Err(Error::NotStrictlyFeasible {
            v: x_tilde.v_val.as_f64(),
        });
    }
    let zero = dual.at_zero()?;
    if zero.witness.v_val <= T::zero() {
        return Err(Error::NonPositiveLambdaRef {
            lambda_ref: 0.0,
            redundant: true,
        });
    }
    let lambda_ref = (zero.phi - x_tilde.f_val) / x_tilde.v_val;
    if !(lambda_ref > T::zero()) {
        return Err(Error::NonPositiveLambdaRef {
            lambda_ref: lambda_ref.as_f64(),
            redundant: lambda_ref == T::zero(),
        });
    }
    Ok(lambda_ref)
}

/// Oracle over an explicit finite set `X`, for arbitrary (non-convex)
/// problems small enough to list.
#[derive(Debug, Clone)]
pub struct FiniteOracle<T> {
    candidates: Vec<PrimalPoint<T>>,
}

impl<T: Scalar> FiniteOracle<T> {
    pub fn new(candidates: Vec<PrimalPoint<T>>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("finite oracle needs at least one point".into()));
        }
        Ok(Self { candidates })
    }

    /// Builds the candidate list by evaluating `f` and `v` on each point.
    pub fn from_points<F, V>(points: Vec<Vec<T>>, f: F, v: V) -> Result<Self>
    where
        F: Fn(&[T]) -> T,
        V: Fn(&[T]) -> T,
    {
        let candidates = points
            .into_iter()
            .map(|x| {
                let (fx, vx) = (f(&x), v(&x));
                PrimalPoint::new(x, fx, vx)
            })
            .collect();
        Self::new(candidates)
    }

    pub fn candidates(&self) -> &[PrimalPoint<T>] {
        &self.candidates
    }
}

impl<T: Scalar> LagrangianOracle<T> for FiniteOracle<T> {
    fn minimize(&self, lambda: T) -> Result<PrimalPoint<T>> {
        let mut best = &self.candidates[0];
        let mut best_val = best.lagrangian(lambda);
        for p in &self.candidates[1..] {
            let val = p.lagrangian(lambda);
            if val < best_val {
                best = p;
                best_val = val;
            }
        }
        Ok(best.clone())
    }

    fn tie_break(&self) -> TieBreak {
        TieBreak::LowestIndex
    }
}
