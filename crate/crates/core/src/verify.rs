//! Invariant checks on a single instance, cross-checked by enumeration.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lagrangian::{DualFunction, LagrangianOracle, PrimalPoint};
use crate::multi_agent::{compose_oracle, LocalSolver, MultiAgentInstance};
use crate::scalar::Scalar;
use crate::solver::{self, DualBiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Number of multipliers on the sampling grid.
    pub grid_points: usize,
    /// Absolute tolerance for value comparisons.
    pub tol: f64,
    pub interval_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_points: 50,
            tol: 1e-7,
            interval_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub lambda_ref: f64,
    pub checks: Vec<Check>,
}

struct Checks(Vec<Check>);

impl Checks {
    fn record(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Runs the bisection from the zero warm start and checks the results and
/// the dual function on a grid over `[0, 2 lambda_ref]`.
///
/// Best responses are compared against integer enumeration where the local
/// integer boxes are small enough; otherwise that check is skipped and
/// reported as such.
pub fn verify_instance<T: Scalar>(
    instance: &MultiAgentInstance<T>,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    instance.validate()?;
    let tol = T::lit(options.tol);
    let oracle = compose_oracle(instance);
    let dual = DualFunction::new(&oracle);
    let x_tilde = instance.point(vec![T::zero(); instance.dimension()])?;
    let lambda_ref = dual.warm_start_lambda_ref(&x_tilde)?;

    let mut checks = Checks(Vec::new());
    let result = solver::solve(&oracle, &DualBiConfig {
        interval_tol: T::lit(options.interval_tol),
        ..DualBiConfig::new(lambda_ref)
    })?;
    checks.record(
        "warm start skips doubling",
        result.doublings == 0,
        format!("{} doubling steps", result.doublings),
    );

    // Replay the incumbent: it is the last probe that became the upper end.
    let mut incumbents = Vec::new();
    let mut feasible = true;
    let mut current: Option<&PrimalPoint<T>> = None;
    for it in &result.history {
        if it.lambda_probe == it.lambda_hi {
            current = Some(&it.candidate);
        }
        if let Some(best_f) = it.best_f {
            let point = current.expect("an incumbent exists once best_f is set");
            feasible &= point.v_val <= T::zero() && point.f_val == best_f;
            incumbents.push(best_f);
        }
    }
    checks.record(
        "incumbent is feasible",
        feasible && result.best.v_val <= T::zero(),
        format!("v(best) = {}", result.best.v_val),
    );
    let monotone = incumbents.windows(2).all(|w| w[1] <= w[0] + tol);
    checks.record(
        "incumbent cost is non-increasing",
        monotone,
        format!("{} incumbents", incumbents.len()),
    );
    let (f_re, v_re) = instance.evaluate(&result.best.x)?;
    checks.record(
        "incumbent re-evaluates exactly",
        f_re == result.best.f_val && v_re == result.best.v_val,
        format!("f = {f_re}, v = {v_re}"),
    );
    checks.record(
        "incumbent lies in the local sets",
        instance.locally_feasible(&result.best.x, T::lit(1e-6))?,
        String::new(),
    );

    let n = options.grid_points.max(2);
    let top = lambda_ref + lambda_ref;
    let grid: Vec<T> = (0..n)
        .map(|i| top * T::lit(i as f64 / (n - 1) as f64))
        .collect();
    let points: Vec<PrimalPoint<T>> = grid
        .iter()
        .map(|&l| oracle.minimize(l))
        .collect::<Result<_>>()?;

    let f_up = points.windows(2).all(|w| w[1].f_val >= w[0].f_val - tol);
    let v_down = points.windows(2).all(|w| w[1].v_val <= w[0].v_val + tol);
    checks.record("f is non-decreasing in lambda", f_up, String::new());
    checks.record("v is non-increasing in lambda", v_down, String::new());

    let (lo, hi) = result.final_interval;
    let signs = grid.iter().zip(&points).all(|(&l, p)| {
        (l >= lo || p.v_val > -tol) && (l <= hi || p.v_val < tol)
    });
    checks.record(
        "v changes sign across the final interval",
        signs,
        format!("interval [{lo}, {hi}]"),
    );

    let phi: Vec<T> = grid.iter().zip(&points).map(|(&l, p)| p.lagrangian(l)).collect();
    let concave = phi
        .windows(3)
        .all(|w| w[1] + tol >= (w[0] + w[2]) / T::lit(2.0));
    checks.record("dual function is concave on the grid", concave, String::new());
    let phi_max = phi.iter().copied().fold(T::neg_infinity(), T::max);
    checks.record(
        "weak duality",
        phi_max <= result.best.f_val + tol && result.best_dual.1 <= result.best.f_val + tol,
        format!("max phi = {phi_max}, f = {}", result.best.f_val),
    );

    let sequential = compose_oracle(instance).sequential();
    let mut same = true;
    for &l in grid.iter().step_by((n / 5).max(1)) {
        same &= sequential.minimize(l)? == oracle.minimize(l)?;
    }
    checks.record("parallel and sequential sweeps agree", same, String::new());

    let enumerator = compose_oracle(instance).with_solver(LocalSolver::BruteForce);
    let mut worst = T::zero();
    let mut skipped = None;
    for (&l, p) in grid.iter().zip(&points) {
        match enumerator.minimize(l) {
            Ok(q) => worst = worst.max((q.lagrangian(l) - p.lagrangian(l)).abs()),
            Err(e) => {
                skipped = Some(e.to_string());
                break;
            }
        }
    }
    match skipped {
        Some(reason) => checks.record("best responses match enumeration", true, format!("skipped: {reason}")),
        None => checks.record(
            "best responses match enumeration",
            worst <= tol * (T::one() + phi_max.abs()),
            format!("largest Lagrangian difference {worst}"),
        ),
    }

    let passed = checks.0.iter().all(|c| c.passed);
    Ok(VerificationReport {
        passed,
        lambda_ref: lambda_ref.as_f64(),
        checks: checks.0,
    })
}
