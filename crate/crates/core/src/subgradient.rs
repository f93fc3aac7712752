//! Projected subgradient dual ascent with ergodic primal averaging.
//!
//! The competitor method for a single scalar coupling constraint. The
//! multiplier follows `lambda <- [lambda + alpha_k mu_k]_+` with
//! `alpha_k = alpha_bar / k`. Once it has settled, the step-weighted average
//! of the primal iterates is tracked until it settles too, and the cheapest
//! feasible iterate seen since the multiplier settled is returned.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianOracle, PrimalPoint};
use crate::multi_agent::{compose_oracle, MultiAgentInstance};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgradientConfig<T> {
    /// Step scale in `alpha_k = alpha_bar / k`.
    pub alpha_bar: T,
    /// Threshold on successive multiplier changes.
    pub conv_tol: T,
    /// Threshold on the max-norm change of successive averages.
    pub avg_tol: T,
    /// Window length `w` for both convergence tests.
    pub window_w: usize,
    pub max_iter: usize,
    pub lambda0: T,
}

impl<T: Scalar> SubgradientConfig<T> {
    pub const DEFAULT_ALPHA_BAR: f64 = 7e-4;
    pub const DEFAULT_AVG_TOL: f64 = 1e-2;

    pub fn new(lambda0: T) -> Self {
        Self {
            alpha_bar: T::lit(Self::DEFAULT_ALPHA_BAR),
            conv_tol: T::lit(1e-5),
            avg_tol: T::lit(Self::DEFAULT_AVG_TOL),
            window_w: 10,
            max_iter: 5000,
            lambda0,
        }
    }

    /// Adapts `alpha_bar`, tuned for 100 agents, to `m` agents.
    ///
    /// From 100 agents up the factor is `m / 100`. Below that it is
    /// `100 / m`: the coupling residual shrinks linearly with `m`, and
    /// shrinking the step as well leaves the multiplier stranded far above
    /// the dual optimum when the steps fall under `conv_tol`.
    pub fn scaled_for_agents(mut self, m: usize) -> Self {
        self.alpha_bar = self.alpha_bar * T::lit(alpha_scale(m));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(self.alpha_bar) {
            return Err(Error::InvalidInput(format!("alpha_bar must be positive, got {}", self.alpha_bar)));
        }
        if !positive(self.conv_tol) {
            return Err(Error::InvalidInput(format!("conv_tol must be positive, got {}", self.conv_tol)));
        }
        if !positive(self.avg_tol) {
            return Err(Error::InvalidInput(format!("avg_tol must be positive, got {}", self.avg_tol)));
        }
        if self.window_w == 0 || self.max_iter == 0 {
            return Err(Error::InvalidInput("window and iteration limit must be positive".into()));
        }
        if !(self.lambda0 >= T::zero()) || !self.lambda0.is_finite() {
            return Err(Error::InvalidInput(format!("lambda0 must be nonnegative, got {}", self.lambda0)));
        }
        Ok(())
    }

    pub fn step(&self, kappa: usize) -> T {
        self.alpha_bar / T::lit(kappa as f64)
    }
}

/// Step-scale factor applied by [`SubgradientConfig::scaled_for_agents`].
pub fn alpha_scale(m: usize) -> f64 {
    let m = m.max(1) as f64;
    if m >= 100.0 {
        m / 100.0
    } else {
        100.0 / m
    }
}

/// Per-iteration record, one line of the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub kappa: usize,
    pub lambda: T,
    pub mu: T,
    pub feasible: bool,
    pub cost: T,
}

/// Iterate kept for the final selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredIterate<T> {
    pub kappa: usize,
    pub point: PrimalPoint<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientTrace<T> {
    /// `lambda(1), lambda(2), ...`; one longer than `records`.
    pub lambda_seq: Vec<T>,
    pub records: Vec<IterationRecord<T>>,
    /// Iterates from the first index of the averaging window on.
    pub primal_store: Vec<StoredIterate<T>>,
    pub ergodic: Vec<T>,
    /// Position of the selected iterate in `primal_store`.
    pub tau_star: usize,
    pub xi_feasible: Vec<T>,
    pub xi_lp: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorResult<T> {
    pub lambda_star: T,
    pub xi_lp: Vec<T>,
    pub xi_feasible: Vec<T>,
    pub f_feasible: T,
    pub v_feasible: T,
    /// Number of oracle sweeps.
    pub iterations: usize,
    pub rho1: T,
    /// Largest dual value seen, as `(lambda, phi)`.
    pub best_dual: (T, T),
    pub trace: SubgradientTrace<T>,
}

/// Runs the method on a multi-agent instance with its default oracle.
pub fn run<T: Scalar>(
    instance: &MultiAgentInstance<T>,
    config: &SubgradientConfig<T>,
) -> Result<CompetitorResult<T>> {
    instance.validate()?;
    run_with(&compose_oracle(instance), config)
}

/// Runs the method against any oracle whose `v` is the coupling residual.
///
/// The multiplier counts as converged after `w + 1` consecutive steps with
/// `|lambda(k+1) - lambda(k)| <= conv_tol`; the flag is not revoked later.
/// Averaging starts one iteration before that point. The average counts as
/// converged after `w` consecutive changes with max-norm `<= avg_tol`, and
/// the run stops at the first such point where the window also holds a
/// feasible iterate.
pub fn run_with<T: Scalar, O: LagrangianOracle<T> + ?Sized>(
    oracle: &O,
    config: &SubgradientConfig<T>,
) -> Result<CompetitorResult<T>> {
    config.validate()?;
    let mut lambda = config.lambda0;
    let mut lambda_seq = vec![lambda];
    let mut records = Vec::new();
    let mut best_dual = (lambda, T::neg_infinity());

    let mut lambda_streak = 0usize;
    let mut previous: Option<PrimalPoint<T>> = None;
    let mut window: Option<Window<T>> = None;

    for kappa in 1..=config.max_iter {
        let point = oracle.minimize(lambda)?;
        let mu = point.v_val;
        records.push(IterationRecord {
            kappa,
            lambda,
            mu,
            feasible: point.is_feasible(),
            cost: point.f_val,
        });
        let phi = point.lagrangian(lambda);
        if phi > best_dual.1 {
            best_dual = (lambda, phi);
        }

        let next = (lambda + config.step(kappa) * mu).max(T::zero());
        lambda_seq.push(next);

        if window.is_none() {
            if (next - lambda).abs() <= config.conv_tol {
                lambda_streak += 1;
            } else {
                lambda_streak = 0;
            }
            if lambda_streak > config.window_w {
                let mut w = Window::new(point.x.len(), config.avg_tol);
                if let Some(prev) = previous.take() {
                    w.push(kappa - 1, config.step(kappa - 1), prev);
                }
                window = Some(w);
            }
        }
        match &mut window {
            Some(w) => {
                w.push(kappa, config.step(kappa), point);
                // With no feasible iterate stored yet, keep going: one is
                // bound to appear while the multiplier is still too small.
                if w.settled_for >= config.window_w && w.feasible_seen {
                    return finish(w, next, kappa, best_dual, lambda_seq, records);
                }
            }
            None => previous = Some(point),
        }
        lambda = next;
    }
    match window {
        Some(w) if !w.feasible_seen => Err(Error::NoFeasibleIterate {
            iterations: config.max_iter,
        }),
        _ => Err(Error::DidNotConverge {
            iterations: config.max_iter,
        }),
    }
}

/// Averaging window state.
struct Window<T> {
    tol: T,
    weighted: Vec<T>,
    weight: T,
    average: Vec<T>,
    settled_for: usize,
    feasible_seen: bool,
    store: Vec<StoredIterate<T>>,
}

impl<T: Scalar> Window<T> {
    fn new(n: usize, tol: T) -> Self {
        Self {
            tol,
            weighted: vec![T::zero(); n],
            weight: T::zero(),
            average: Vec::new(),
            settled_for: 0,
            feasible_seen: false,
            store: Vec::new(),
        }
    }

    fn push(&mut self, kappa: usize, alpha: T, point: PrimalPoint<T>) {
        for (acc, &x) in self.weighted.iter_mut().zip(&point.x) {
            *acc = *acc + alpha * x;
        }
        self.weight = self.weight + alpha;
        let average: Vec<T> = self.weighted.iter().map(|&s| s / self.weight).collect();
        if !self.average.is_empty() {
            let change = average
                .iter()
                .zip(&self.average)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max);
            if change <= self.tol {
                self.settled_for += 1;
            } else {
                self.settled_for = 0;
            }
        }
        self.average = average;
        self.feasible_seen |= point.is_feasible();
        self.store.push(StoredIterate { kappa, point });
    }
}

fn finish<T: Scalar>(
    window: &mut Window<T>,
    lambda_star: T,
    iterations: usize,
    best_dual: (T, T),
    lambda_seq: Vec<T>,
    records: Vec<IterationRecord<T>>,
) -> Result<CompetitorResult<T>> {
    let mut tau_star: Option<usize> = None;
    for (i, s) in window.store.iter().enumerate() {
        if !s.point.is_feasible() {
            continue;
        }
        if tau_star.map_or(true, |t| s.point.f_val < window.store[t].point.f_val) {
            tau_star = Some(i);
        }
    }
    let tau_star = tau_star.ok_or(Error::NoFeasibleIterate { iterations })?;
    let chosen = window.store[tau_star].point.clone();
    let store = std::mem::take(&mut window.store);
    let ergodic = std::mem::take(&mut window.average);
    Ok(CompetitorResult {
        lambda_star,
        xi_lp: ergodic.clone(),
        xi_feasible: chosen.x.clone(),
        f_feasible: chosen.f_val,
        v_feasible: chosen.v_val,
        iterations,
        rho1: chosen.v_val.max(T::zero()),
        best_dual,
        trace: SubgradientTrace {
            lambda_seq,
            records,
            primal_store: store,
            ergodic: ergodic.clone(),
            tau_star,
            xi_feasible: chosen.x,
            xi_lp: ergodic,
        },
    })
}

/// `[sum_i A_i xi_i - b]_+`: the budget tightening the outer loop would
/// apply next. Zero means that loop stops after one pass.
pub fn check_rho_halt<T: Scalar>(xi_feasible: &[T], instance: &MultiAgentInstance<T>) -> Result<T> {
    let (_, v) = instance.evaluate(xi_feasible)?;
    Ok(v.max(T::zero()))
}

/// Writes `kappa,lambda,mu,feasible,cost` rows.
pub fn write_trace_csv<T: Scalar, W: Write>(trace: &SubgradientTrace<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kappa", "lambda", "mu", "feasible", "cost"])?;
    for r in &trace.records {
        w.write_record([
            r.kappa.to_string(),
            r.lambda.to_string(),
            r.mu.to_string(),
            u8::from(r.feasible).to_string(),
            r.cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
