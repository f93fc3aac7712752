//! Dual bisection on the multiplier of a single complicating constraint.
//!
//! The dual function is concave and `v(x_lambda)` is a supergradient, so its
//! sign tells on which side of the dual optimum a probe lies. A doubling
//! phase brackets the optimum, then bisection shrinks the bracket while
//! keeping the best feasible minimizer seen at its upper end.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianOracle, PrimalPoint};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBiConfig<T> {
    /// First upper end of the bracket. A warm-started value skips doubling.
    pub lambda_ref: T,
    /// Stop once the bracket is narrower than this.
    pub interval_tol: T,
    /// `|v| <= v_zero_tol` counts as an exactly active constraint.
    pub v_zero_tol: T,
    pub max_doubling: usize,
    pub max_bisection: usize,
    /// Record every iterate (needed for traces).
    pub keep_history: bool,
}

impl<T: Scalar> DualBiConfig<T> {
    pub fn new(lambda_ref: T) -> Self {
        Self {
            lambda_ref,
            interval_tol: T::lit(1e-5),
            v_zero_tol: T::zero(),
            max_doubling: 64,
            max_bisection: 200,
            keep_history: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ref > T::zero()) || !self.lambda_ref.is_finite() {
            return Err(Error::NonPositiveLambdaRef {
                lambda_ref: self.lambda_ref.as_f64(),
                redundant: false,
            });
        }
        if !(self.interval_tol > T::zero()) || !self.interval_tol.is_finite() {
            return Err(Error::InvalidInput(format!(
                "interval tolerance must be positive, got {}",
                self.interval_tol
            )));
        }
        if !(self.v_zero_tol >= T::zero()) || !self.v_zero_tol.is_finite() {
            return Err(Error::InvalidInput(format!(
                "zero-violation tolerance must be nonnegative, got {}",
                self.v_zero_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// The probe at `lambda_ref`.
    Initial,
    Doubling,
    Bisection,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Doubling => "doubling",
            Phase::Bisection => "bisection",
        }
    }
}

/// State after one probe of the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBiIterate<T> {
    pub k: usize,
    pub phase: Phase,
    pub lambda_lo: T,
    pub lambda_hi: T,
    pub lambda_probe: T,
    pub candidate: PrimalPoint<T>,
    /// Best feasible minimizer so far; `None` while still doubling.
    pub best_f: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualBiStatus {
    /// A probe hit `v = 0`, so its minimizer is optimal for the primal.
    OptimalZeroViolation,
    /// The bracket shrank below the interval tolerance.
    FeasibleConverged,
    /// The bisection budget ran out first.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBiResult<T> {
    pub status: DualBiStatus,
    /// Feasible minimizer at the upper end of the final bracket.
    pub best: PrimalPoint<T>,
    pub lambda_ref: T,
    /// Doubling steps taken.
    pub doublings: usize,
    /// Bisection probes taken.
    pub bisections: usize,
    pub final_interval: (T, T),
    /// Multiplier at which `best` was produced.
    pub lambda_certificate: T,
    /// Largest dual value seen over all probes, with its multiplier.
    pub best_dual: (T, T),
    pub history: Vec<DualBiIterate<T>>,
}

impl<T: Scalar> DualBiResult<T> {
    /// Oracle calls after the first, i.e. doubling steps plus bisection probes.
    pub fn iterations(&self) -> usize {
        self.doublings + self.bisections
    }

    /// Total oracle calls including the probe at `lambda_ref`.
    pub fn probes(&self) -> usize {
        1 + self.iterations()
    }

    /// `phi(lambda_certificate) <= phi*`, so `f(best) - phi(lambda_certificate)`
    /// bounds the duality gap of `best` from above.
    pub fn certified_gap(&self) -> T {
        -self.lambda_certificate * self.best.v_val
    }
}

/// Bracket produced by the doubling phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Doubling<T> {
    pub doublings: usize,
    pub lambda_lo: T,
    pub lambda_hi: T,
    /// Minimizer at `lambda_hi`, with `v <= v_zero_tol`.
    pub upper_probe: PrimalPoint<T>,
    /// Every probe in order, starting with `lambda_ref`.
    pub trail: Vec<(T, PrimalPoint<T>)>,
}

/// Doubles `lambda_hi` from `lambda_ref` until the minimizer is feasible.
pub fn doubling_phase<T: Scalar, O: LagrangianOracle<T> + ?Sized>(
    oracle: &O,
    lambda_ref: T,
    v_zero_tol: T,
    max_doubling: usize,
) -> Result<Doubling<T>> {
    let mut lo = T::zero();
    let mut hi = lambda_ref;
    let mut probe = oracle.minimize(hi)?;
    let mut trail = vec![(hi, probe.clone())];
    let mut doublings = 0;
    while probe.v_val > v_zero_tol {
        if doublings == max_doubling || !(hi + hi).is_finite() {
            return Err(Error::InfeasibleSuspected {
                doublings,
                lambda_hi: hi.as_f64(),
                v: probe.v_val.as_f64(),
            });
        }
        lo = hi;
        hi = hi + hi;
        probe = oracle.minimize(hi)?;
        trail.push((hi, probe.clone()));
        doublings += 1;
    }
    Ok(Doubling {
        doublings,
        lambda_lo: lo,
        lambda_hi: hi,
        upper_probe: probe,
        trail,
    })
}

/// Runs doubling then bisection.
///
/// Errors with `InfeasibleSuspected` when doubling never reaches a feasible
/// minimizer within `max_doubling` steps.
pub fn solve<T: Scalar, O: LagrangianOracle<T> + ?Sized>(
    oracle: &O,
    config: &DualBiConfig<T>,
) -> Result<DualBiResult<T>> {
    config.validate()?;
    let tol = config.v_zero_tol;
    let doubling = doubling_phase(oracle, config.lambda_ref, tol, config.max_doubling)?;

    let mut history = Vec::new();
    let mut best_dual = (T::zero(), T::neg_infinity());
    let mut note_dual = |lambda: T, p: &PrimalPoint<T>| {
        let phi = p.lagrangian(lambda);
        if phi > best_dual.1 {
            best_dual = (lambda, phi);
        }
    };
    for (k, (lambda, p)) in doubling.trail.iter().enumerate() {
        note_dual(*lambda, p);
        if config.keep_history {
            let last = k == doubling.doublings;
            history.push(DualBiIterate {
                k,
                phase: if k == 0 { Phase::Initial } else { Phase::Doubling },
                lambda_lo: if k == 0 { T::zero() } else { *lambda / T::lit(2.0) },
                lambda_hi: *lambda,
                lambda_probe: *lambda,
                candidate: p.clone(),
                best_f: last.then_some(p.f_val),
            });
        }
    }

    let (mut lo, mut hi) = (doubling.lambda_lo, doubling.lambda_hi);
    let mut best = doubling.upper_probe;
    let mut certificate = hi;
    let mut bisections = 0;
    let finish = |status, best, lo, hi, certificate, bisections, best_dual, history| DualBiResult {
        status,
        best,
        lambda_ref: config.lambda_ref,
        doublings: doubling.doublings,
        bisections,
        final_interval: (lo, hi),
        lambda_certificate: certificate,
        best_dual,
        history,
    };

    if best.v_val.abs() <= tol {
        return Ok(finish(
            DualBiStatus::OptimalZeroViolation,
            best,
            lo,
            hi,
            certificate,
            0,
            best_dual,
            history,
        ));
    }

    loop {
        if hi - lo < config.interval_tol {
            return Ok(finish(
                DualBiStatus::FeasibleConverged,
                best,
                lo,
                hi,
                certificate,
                bisections,
                best_dual,
                history,
            ));
        }
        if bisections == config.max_bisection {
            return Ok(finish(
                DualBiStatus::MaxIterations,
                best,
                lo,
                hi,
                certificate,
                bisections,
                best_dual,
                history,
            ));
        }
        let mid = (lo + hi) / T::lit(2.0);
        if !(mid > lo && mid < hi) {
            // Bracket is at floating-point resolution.
            return Ok(finish(
                DualBiStatus::FeasibleConverged,
                best,
                lo,
                hi,
                certificate,
                bisections,
                best_dual,
                history,
            ));
        }
        let candidate = oracle.minimize(mid)?;
        bisections += 1;
        note_dual(mid, &candidate);

        let zero = candidate.v_val.abs() <= tol;
        if zero || candidate.v_val < T::zero() {
            hi = mid;
            best = candidate.clone();
            certificate = mid;
        } else {
            lo = mid;
        }
        if config.keep_history {
            history.push(DualBiIterate {
                k: doubling.doublings + bisections,
                phase: Phase::Bisection,
                lambda_lo: lo,
                lambda_hi: hi,
                lambda_probe: mid,
                candidate,
                best_f: Some(best.f_val),
            });
        }
        if zero {
            return Ok(finish(
                DualBiStatus::OptimalZeroViolation,
                best,
                lo,
                hi,
                certificate,
                bisections,
                best_dual,
                history,
            ));
        }
    }
}

/// Writes the iterate history as CSV with columns
/// `k,phase,lambda_lo,lambda_hi,lambda_probe,f,v,best_f`.
pub fn write_trace_csv<T: Scalar, W: Write>(result: &DualBiResult<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "phase", "lambda_lo", "lambda_hi", "lambda_probe", "f", "v", "best_f"])?;
    for it in &result.history {
        w.write_record([
            it.k.to_string(),
            it.phase.as_str().to_string(),
            it.lambda_lo.to_string(),
            it.lambda_hi.to_string(),
            it.lambda_probe.to_string(),
            it.candidate.f_val.to_string(),
            it.candidate.v_val.to_string(),
            it.best_f.map(|f| f.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
