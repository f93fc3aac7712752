//! Random instances, the relative gap metric, and head-to-head runs.
//!
//! # Instance recipe
//!
//! Agent `i` draws from its own ChaCha8 stream: the generator is seeded with
//! `seed_from_u64(s)` and switched to stream `i` with `set_stream(i)`.
//! Uniforms are `(next_u64 >> 11) * 2^-53`; normals use Box-Muller on two
//! consecutive uniforms `u1, u2` as `sqrt(-2 ln(1 - u1)) cos(2 pi u2)`.
//! Per agent the draws happen in this order:
//!
//! 1. `c`: `n` values, `c_j = -u` (so `c_j in [-1, 0]`);
//! 2. `G`: `rows x n` standard normals, row-major;
//! 3. `g`: `rows` uniforms in `[0, 1)`;
//! 4. `A`: `n` uniforms in `[0, 1)`.
//!
//! Variables are ordered continuous first, then integer. Bounds are
//! `[-box, box]`, or `[-int_box, int_box]` for the integer ones when set.
//! The budget is `budget_fraction` times the usage of the uncoupled optimum.
//! If that usage is not positive the whole instance is redrawn with seed
//! `s + a * 0x9E3779B97F4A7C15` for attempt `a = 1, 2, ...`.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solver::{self, DualBiConfig, DualBiResult};
use crate::error::{Error, Result};
use crate::lagrangian::DualFunction;
use crate::milp::{LinearProgram, MixedIntegerProgram};
use crate::multi_agent::{agent_best_response, compose_oracle, Agent, MultiAgentInstance};
use crate::scalar::{compensated_sum, Scalar};
use crate::subgradient::{self, CompetitorResult, SubgradientConfig};

const RESAMPLE_LIMIT: u64 = 100;
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n_c: usize,
    pub n_d: usize,
    #[serde(rename = "box")]
    pub box_bound: f64,
    /// Separate bound for integer variables; `None` uses `box_bound`.
    pub int_box: Option<f64>,
    pub rows: usize,
    pub seed: u64,
    pub budget_fraction: f64,
    /// Accept `budget_fraction >= 1`, which makes the coupling redundant.
    pub allow_redundant: bool,
}

impl GeneratorConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            n_c: 5,
            n_d: 3,
            box_bound: 10.0,
            int_box: None,
            rows: 10,
            seed,
            budget_fraction: 0.5,
            allow_redundant: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n_c + self.n_d == 0 {
            return Err(Error::InvalidInput("need at least one agent and one variable".into()));
        }
        let int_box = self.int_box.unwrap_or(self.box_bound);
        if !(self.box_bound > 0.0) || !self.box_bound.is_finite() {
            return Err(Error::InvalidInput(format!("box must be positive, got {}", self.box_bound)));
        }
        if self.n_d > 0 && (!(int_box >= 0.0) || int_box != int_box.floor()) {
            return Err(Error::InvalidInput(format!(
                "integer box must be a nonnegative integer, got {int_box}"
            )));
        }
        let frac_ok = self.budget_fraction > 0.0
            && self.budget_fraction.is_finite()
            && (self.allow_redundant || self.budget_fraction < 1.0);
        if !frac_ok {
            return Err(Error::InvalidInput(format!(
                "budget fraction must lie in (0, 1), got {}",
                self.budget_fraction
            )));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn draw_agent<T: Scalar>(cfg: &GeneratorConfig, seed: u64, index: usize) -> Agent<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = cfg.n_c + cfg.n_d;
    let cost: Vec<T> = (0..n).map(|_| T::lit(-uniform(&mut rng))).collect();
    let ineq_matrix: Vec<Vec<T>> = (0..cfg.rows)
        .map(|_| (0..n).map(|_| T::lit(normal(&mut rng))).collect())
        .collect();
    let ineq_rhs: Vec<T> = (0..cfg.rows).map(|_| T::lit(uniform(&mut rng))).collect();
    let coupling_row: Vec<T> = (0..n).map(|_| T::lit(uniform(&mut rng))).collect();

    let int_box = cfg.int_box.unwrap_or(cfg.box_bound);
    let bound = |j: usize| T::lit(if j < cfg.n_c { cfg.box_bound } else { int_box });
    let upper: Vec<T> = (0..n).map(bound).collect();
    let lower: Vec<T> = upper.iter().map(|&u| -u).collect();
    let integer_mask = (0..n).map(|j| j >= cfg.n_c).collect();

    Agent::new(
        MixedIntegerProgram::new(
            LinearProgram {
                cost,
                ineq_matrix,
                ineq_rhs,
                lower,
                upper,
            },
            integer_mask,
        ),
        coupling_row,
    )
}

/// Total coupling usage of the agents' uncoupled optima.
pub fn uncoupled_usage<T: Scalar>(agents: &[Agent<T>]) -> Result<T> {
    let usages: Vec<T> = agents
        .par_iter()
        .enumerate()
        .map(|(i, a)| agent_best_response(a, i, T::zero()).map(|r| r.local_usage))
        .collect::<Result<_>>()?;
    Ok(compensated_sum(usages))
}

/// Draws an instance; see the module docs for the exact recipe.
pub fn generate_instance<T: Scalar>(cfg: &GeneratorConfig) -> Result<MultiAgentInstance<T>> {
    cfg.validate()?;
    for attempt in 0..RESAMPLE_LIMIT {
        let seed = cfg.seed.wrapping_add(attempt.wrapping_mul(SEED_STRIDE));
        let agents: Vec<Agent<T>> = (0..cfg.m).map(|i| draw_agent(cfg, seed, i)).collect();
        let usage = uncoupled_usage(&agents)?;
        if usage > T::zero() {
            let budget = T::lit(cfg.budget_fraction) * usage;
            return Ok(MultiAgentInstance::new(budget, agents));
        }
    }
    Err(Error::NonRedundancyUnattainable {
        attempts: RESAMPLE_LIMIT as usize,
    })
}

/// `(f_hat - phi_star) / |phi_star|`, as a fraction.
pub fn delta_f_pct<T: Scalar>(f_hat: T, phi_star: T) -> Result<T> {
    if !(phi_star.abs() >= T::lit(1e-12)) {
        return Err(Error::DegenerateDual {
            phi_star: phi_star.as_f64(),
        });
    }
    Ok((f_hat - phi_star) / phi_star.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T> {
    pub m: usize,
    pub lambda_ref: T,
    /// Largest dual value seen by either method (and at zero).
    pub phi_star: T,
    /// Gap of the bisection solution.
    pub delta_f_pct: Option<T>,
    pub delta_f_pct_competitor: Option<T>,
    /// Doubling plus bisection probes.
    pub iters_dualbi: Option<usize>,
    /// Subgradient iterations.
    pub iters_competitor: Option<usize>,
    pub f_dualbi: Option<T>,
    pub f_competitor: Option<T>,
    pub v_dualbi: Option<T>,
    pub v_competitor: Option<T>,
    pub wall_time_dualbi: f64,
    pub wall_time_competitor: f64,
    pub dualbi_error: Option<String>,
    pub competitor_error: Option<String>,
}

/// Full output of [`run_comparison`].
#[derive(Debug, Clone)]
pub struct Comparison<T> {
    pub report: ComparisonReport<T>,
    pub dualbi: Option<DualBiResult<T>>,
    pub competitor: Option<CompetitorResult<T>>,
}

/// Runs both methods from the same warm start.
///
/// `lambda_ref` comes from `x_tilde = 0` and overrides both
/// `dualbi_cfg.lambda_ref` and `sg_cfg.lambda0`. A failure of one method is
/// recorded in the report; the call errors only if the warm start fails or
/// both methods fail.
pub fn run_comparison<T: Scalar>(
    instance: &MultiAgentInstance<T>,
    dualbi_cfg: &DualBiConfig<T>,
    sg_cfg: &SubgradientConfig<T>,
) -> Result<Comparison<T>> {
    instance.validate()?;
    let oracle = compose_oracle(instance);
    let dual = DualFunction::new(&oracle);
    let x_tilde = instance.point(vec![T::zero(); instance.dimension()])?;
    let lambda_ref = dual.warm_start_lambda_ref(&x_tilde)?;
    let phi_zero = dual.at_zero()?.phi;

    let started = Instant::now();
    let bisection = solver::solve(&oracle, &DualBiConfig {
        lambda_ref,
        ..*dualbi_cfg
    });
    let wall_time_dualbi = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let competitor = subgradient::run_with(&oracle, &SubgradientConfig {
        lambda0: lambda_ref,
        ..*sg_cfg
    });
    let wall_time_competitor = started.elapsed().as_secs_f64();

    if competitor.is_err() {
        if let Err(e) = bisection {
            return Err(e);
        }
    }

    let mut phi_star = phi_zero;
    if let Ok(r) = &bisection {
        phi_star = phi_star.max(r.best_dual.1);
    }
    if let Ok(r) = &competitor {
        phi_star = phi_star.max(r.best_dual.1);
    }
    let gap = |f: T| delta_f_pct(f, phi_star).ok();

    let report = ComparisonReport {
        m: instance.num_agents(),
        lambda_ref,
        phi_star,
        delta_f_pct: bisection.as_ref().ok().and_then(|r| gap(r.best.f_val)),
        delta_f_pct_competitor: competitor.as_ref().ok().and_then(|r| gap(r.f_feasible)),
        iters_dualbi: bisection.as_ref().ok().map(DualBiResult::iterations),
        iters_competitor: competitor.as_ref().ok().map(|r| r.iterations),
        f_dualbi: bisection.as_ref().ok().map(|r| r.best.f_val),
        f_competitor: competitor.as_ref().ok().map(|r| r.f_feasible),
        v_dualbi: bisection.as_ref().ok().map(|r| r.best.v_val),
        v_competitor: competitor.as_ref().ok().map(|r| r.v_feasible),
        wall_time_dualbi,
        wall_time_competitor,
        dualbi_error: bisection.as_ref().err().map(describe),
        competitor_error: competitor.as_ref().err().map(describe),
    };
    Ok(Comparison {
        report,
        dualbi: bisection.ok(),
        competitor: competitor.ok(),
    })
}

fn describe(e: &Error) -> String {
    format!("{}: {e}", e.kind())
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub m: usize,
    pub seed: u64,
    pub delta_f_pct: Option<f64>,
    #[serde(rename = "K_D")]
    pub k_d: Option<usize>,
    #[serde(rename = "K_M")]
    pub k_m: Option<usize>,
    pub f_dualbi: Option<f64>,
    pub f_competitor: Option<f64>,
    pub phi_star: f64,
    pub lambda_ref: f64,
    pub wall_time_dualbi: f64,
    pub wall_time_competitor: f64,
}

impl TableRow {
    pub fn from_report<T: Scalar>(seed: u64, r: &ComparisonReport<T>) -> Self {
        Self {
            m: r.m,
            seed,
            delta_f_pct: r.delta_f_pct.map(Scalar::as_f64),
            k_d: r.iters_dualbi,
            k_m: r.iters_competitor,
            f_dualbi: r.f_dualbi.map(Scalar::as_f64),
            f_competitor: r.f_competitor.map(Scalar::as_f64),
            phi_star: r.phi_star.as_f64(),
            lambda_ref: r.lambda_ref.as_f64(),
            wall_time_dualbi: r.wall_time_dualbi,
            wall_time_competitor: r.wall_time_competitor,
        }
    }
}

/// CSV with header
/// `m,seed,delta_f_pct,K_D,K_M,f_dualbi,f_competitor,phi_star,lambda_ref,wall_time_dualbi,wall_time_competitor`.
pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "m",
            "seed",
            "delta_f_pct",
            "K_D",
            "K_M",
            "f_dualbi",
            "f_competitor",
            "phi_star",
            "lambda_ref",
            "wall_time_dualbi",
            "wall_time_competitor",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown table with the columns `m`, `seed`, `Δf%`, `K_D`, `K_M`.
pub fn table_markdown(rows: &[TableRow]) -> String {
    let dash = || "-".to_string();
    let mut s = String::from("| m | seed | Δf% | K_D | K_M |\n|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.m,
            r.seed,
            r.delta_f_pct.map_or_else(dash, |d| format!("{d:.3e}")),
            r.k_d.map_or_else(dash, |k| k.to_string()),
            r.k_m.map_or_else(dash, |k| k.to_string()),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_metric() {
        assert_eq!(delta_f_pct(-100.0, -100.0).unwrap(), 0.0);
        assert!((delta_f_pct(-99.0_f64, -100.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(delta_f_pct(1.0, 0.0).unwrap_err().kind(), "DegenerateDual");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::new(3, 7);
        let a: MultiAgentInstance<f64> = generate_instance(&cfg).unwrap();
        let b: MultiAgentInstance<f64> = generate_instance(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(3, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_shapes_and_ranges() {
        let inst: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(4, 1)).unwrap();
        assert_eq!(inst.num_agents(), 4);
        for a in &inst.agents {
            assert_eq!(a.num_vars(), 8);
            assert_eq!(a.local.lp.num_rows(), 10);
            assert!(a.cost().iter().all(|&c| (-1.0..=0.0).contains(&c)));
            assert!(a.coupling_row.iter().all(|&x| (0.0..1.0).contains(&x)));
            assert!(a.local.lp.ineq_rhs.iter().all(|&x| (0.0..1.0).contains(&x)));
            assert_eq!(a.local.integer_mask, vec![false, false, false, false, false, true, true, true]);
            assert!(a.local.is_feasible(&[0.0; 8], 0.0));
        }
        let usage = uncoupled_usage(&inst.agents).unwrap();
        assert!(usage > inst.budget);
        assert_eq!(inst.budget, 0.5 * usage);
    }

    #[test]
    fn agent_streams_are_independent_of_agent_count() {
        let small: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(2, 5)).unwrap();
        let large: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(6, 5)).unwrap();
        assert_eq!(small.agents[..], large.agents[..2]);
    }

    #[test]
    fn generator_rejects_bad_configs() {
        let mut cfg = GeneratorConfig::new(2, 0);
        cfg.budget_fraction = 1.0;
        assert!(generate_instance::<f64>(&cfg).is_err());
        cfg.allow_redundant = true;
        assert!(generate_instance::<f64>(&cfg).is_ok());
        let mut cfg = GeneratorConfig::new(2, 0);
        cfg.int_box = Some(2.5);
        assert!(generate_instance::<f64>(&cfg).is_err());
    }

    #[test]
    fn comparison_on_small_instance() {
        let inst: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(3, 42)).unwrap();
        let out = run_comparison(
            &inst,
            &DualBiConfig::new(1.0),
            &SubgradientConfig::new(0.0).scaled_for_agents(3),
        )
        .unwrap();
        let r = &out.report;
        assert_eq!(out.dualbi.as_ref().unwrap().doublings, 0);
        assert!(r.delta_f_pct.unwrap() >= 0.0);
        assert!(r.v_dualbi.unwrap() <= 0.0);
        assert!(r.f_dualbi.unwrap() >= r.phi_star);
    }

    #[test]
    fn table_outputs() {
        let row = TableRow {
            m: 5,
            seed: 1,
            delta_f_pct: Some(0.0125),
            k_d: Some(19),
            k_m: None,
            f_dualbi: Some(-3.0),
            f_competitor: None,
            phi_star: -3.1,
            lambda_ref: 4.0,
            wall_time_dualbi: 0.0,
            wall_time_competitor: 0.0,
        };
        let mut buf = Vec::new();
        write_table_csv(&[row.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,seed,delta_f_pct,K_D,K_M,f_dualbi,f_competitor,phi_star,lambda_ref,"));
        let back: TableRow = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(back, row);
        let md = table_markdown(&[row]);
        assert!(md.contains("| 5 | 1 | 1.250e-2 | 19 | - |"));
    }
}
