//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use dualbi::harness::{generate_instance, run_comparison, Comparison, GeneratorConfig};
use dualbi::lagrangian::{FiniteOracle, LagrangianOracle, PrimalPoint};
use dualbi::milp::{branch_and_bound, brute_force, LinearProgram, MipStatus, MixedIntegerProgram};
use dualbi::multi_agent::{compose_oracle, Agent, LocalSolver, MultiAgentInstance};
use dualbi::solver::{self, DualBiConfig, DualBiResult, DualBiStatus};
use dualbi::subgradient::{check_rho_halt, SubgradientConfig};
use dualbi::DualFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INTERVAL_TOL: f64 = 1e-5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn warm_start(instance: &MultiAgentInstance<f64>) -> f64 {
    let oracle = compose_oracle(instance);
    let dual = DualFunction::new(&oracle);
    let zero = instance.point(vec![0.0; instance.dimension()]).unwrap();
    dual.warm_start_lambda_ref(&zero).unwrap()
}

fn bisect(instance: &MultiAgentInstance<f64>, lambda_ref: f64) -> DualBiResult<f64> {
    let oracle = compose_oracle(instance);
    solver::solve(&oracle, &DualBiConfig { interval_tol: INTERVAL_TOL, ..DualBiConfig::new(lambda_ref) }).unwrap()
}

/// Incumbent points in the order they were adopted, replayed from the trace.
fn incumbents(result: &DualBiResult<f64>) -> Vec<(f64, PrimalPoint<f64>)> {
    let mut out = Vec::new();
    let mut current: Option<&PrimalPoint<f64>> = None;
    for it in &result.history {
        if it.lambda_probe == it.lambda_hi {
            current = Some(&it.candidate);
        }
        if let (Some(best_f), Some(p)) = (it.best_f, current) {
            out.push((best_f, p.clone()));
        }
    }
    out
}

/// Concave grid sequence with memoised evaluation.
struct Grid<'a> {
    step: f64,
    len: usize,
    phi: Box<dyn Fn(f64) -> f64 + 'a>,
    memo: HashMap<usize, f64>,
}

impl Grid<'_> {
    fn at(&mut self, k: usize) -> f64 {
        if let Some(&v) = self.memo.get(&k) {
            return v;
        }
        let v = (self.phi)(k as f64 * self.step);
        self.memo.insert(k, v);
        v
    }

    fn argmax(&mut self) -> usize {
        let (mut lo, mut hi) = (0, self.len - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.at(mid + 1) > self.at(mid) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Smallest and largest index whose value is within `tol` of the max.
    fn near_max(&mut self, top: usize, tol: f64) -> (usize, usize) {
        let cut = self.at(top) - tol;
        let (mut lo, mut hi) = (0, top);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.at(mid) >= cut {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let left = lo;
        let (mut lo, mut hi) = (top, self.len - 1);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.at(mid) >= cut {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        (left, lo)
    }
}

/// K counts every generated instance seen by the bisection suites.
struct WarmStartLog {
    instances: usize,
    nonzero: Vec<String>,
}

impl WarmStartLog {
    fn record(&mut self, label: String, result: &DualBiResult<f64>) {
        self.instances += 1;
        if result.doublings != 0 {
            self.nonzero.push(format!("{label}: K={}", result.doublings));
        }
    }
}

fn incumbent_suite(log: &mut WarmStartLog) -> Outcome {
    let tol = 1e-9;
    let step = 1e-3;
    let mut failures = Vec::new();
    let mut literal_misses = 0;
    for seed in 0..100u64 {
        let cfg = GeneratorConfig { int_box: Some(3.0), ..GeneratorConfig::new(5, seed) };
        let instance: MultiAgentInstance<f64> = generate_instance(&cfg).unwrap();
        let lambda_ref = warm_start(&instance);
        let result = bisect(&instance, lambda_ref);
        log.record(format!("m=5 seed {seed}"), &result);

        let trail = incumbents(&result);
        for (best_f, p) in &trail {
            let (f, v) = instance.evaluate(&p.x).unwrap();
            if v > tol || (f - best_f).abs() > tol {
                failures.push(format!("seed {seed}: incumbent v={v} f={f} recorded {best_f}"));
            }
        }
        if trail.windows(2).any(|w| w[1].0 > w[0].0 + tol) {
            failures.push(format!("seed {seed}: incumbent cost increased"));
        }

        let enumerator = compose_oracle(&instance).with_solver(LocalSolver::BruteForce);
        let mut grid = Grid {
            step,
            len: (lambda_ref / step).ceil() as usize + 2,
            phi: Box::new(|l| enumerator.minimize(l).unwrap().lagrangian(l)),
            memo: HashMap::new(),
        };
        let top = grid.argmax();
        let (left, right) = grid.near_max(top, 1e-6);
        let (lo, hi) = result.final_interval;
        let (a, b) = (left as f64 * step, right as f64 * step);
        if a < lo || b > hi {
            literal_misses += 1;
        }
        if a < lo - step || b > hi + step {
            failures.push(format!("seed {seed}: grid maximisers [{a}, {b}] outside [{lo}, {hi}] by more than one step"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "100 instances (m=5, integer box 3); {} failures{}; grid maximisers within one 1e-3 step of the final interval; {} of 100 fall strictly inside the 1e-5 interval",
            failures.len(),
            first(&failures),
            100 - literal_misses
        ),
    )
}

fn first(failures: &[String]) -> String {
    failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
}

fn expected_probes(lambda_ref: f64) -> usize {
    (lambda_ref / INTERVAL_TOL).log2().ceil() as usize
}

struct SweepInstance {
    seed: u64,
    instance: MultiAgentInstance<f64>,
    lambda_ref: f64,
    result: DualBiResult<f64>,
}

fn sweep_instances(log: &mut WarmStartLog) -> Vec<SweepInstance> {
    (0..100u64)
        .map(|seed| {
            let instance: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(20, seed)).unwrap();
            let lambda_ref = warm_start(&instance);
            let result = bisect(&instance, lambda_ref);
            log.record(format!("m=20 seed {seed}"), &result);
            SweepInstance { seed, instance, lambda_ref, result }
        })
        .collect()
}

fn probe_count(sweep: &[SweepInstance]) -> Outcome {
    let mut matched = 0;
    let mut early = 0;
    let mut misses = Vec::new();
    for s in sweep {
        if s.result.status == DualBiStatus::OptimalZeroViolation {
            early += 1;
            continue;
        }
        let want = expected_probes(s.lambda_ref);
        if s.result.iterations() == want {
            matched += 1;
        } else {
            misses.push(format!("seed {}: {} probes, expected {want}", s.seed, s.result.iterations()));
        }
    }

    // Synthetic two-point problems with the multiplier anywhere inside the bracket.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bracket_ok = true;
    let mut seen = Vec::new();
    // Only (2.62, 2^18 * 1e-5] gives 18, so pin a few values near both ends.
    let pinned = [2.6201, 2.621, 2.6214, 5.2399];
    let drawn: Vec<f64> = (0..200).map(|_| rng.gen_range(2.6201..5.2399)).collect();
    for lambda_ref in pinned.into_iter().chain(drawn) {
        let lambda_star = rng.gen_range(0.01..0.99) * lambda_ref;
        let oracle = FiniteOracle::from_points(
            vec![vec![0.0], vec![1.0]],
            |x: &[f64]| 2.0 * lambda_star * x[0],
            |x: &[f64]| 1.0 - 2.0 * x[0],
        )
        .unwrap();
        let r = solver::solve(&oracle, &DualBiConfig { interval_tol: INTERVAL_TOL, ..DualBiConfig::new(lambda_ref) }).unwrap();
        let k = r.iterations();
        bracket_ok &= (18..=19).contains(&k) && k == expected_probes(lambda_ref);
        if !seen.contains(&k) {
            seen.push(k);
        }
    }
    seen.sort();
    let counted = sweep.len() - early;
    outcome(
        matched + early >= 95 && bracket_ok,
        format!(
            "{matched} of {counted} seeds match ceil(log2(lambda_ref/1e-5)), {early} stopped early at v=0{}; lambda_ref in (2.62, 5.24) gave probe counts {seen:?} over 204 synthetic runs",
            first(&misses)
        ),
    )
}

fn warm_start_check(log: &WarmStartLog) -> Outcome {
    outcome(
        log.nonzero.is_empty(),
        format!("K=0 on {} of {} generated instances{}", log.instances - log.nonzero.len(), log.instances, first(&log.nonzero)),
    )
}

/// Continuous knapsack-style instances whose dual has a flat top.
fn flat_top_instance(rng: &mut ChaCha8Rng) -> (MultiAgentInstance<f64>, f64) {
    let agents = rng.gen_range(2..=4);
    let sizes: Vec<usize> = (0..agents).map(|_| rng.gen_range(1..=2)).collect();
    let n: usize = sizes.iter().sum();
    let mut slots: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        slots.swap(i, rng.gen_range(0..=i));
    }
    let ratio: Vec<f64> = slots.iter().map(|&s| 0.5 * (s + 1) as f64 + rng.gen_range(0.0..0.05)).collect();
    let weight: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let cost: Vec<f64> = (0..n).map(|j| -ratio[j] * weight[j]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ratio[b].total_cmp(&ratio[a]));
    let k = rng.gen_range(1..n);
    let budget: f64 = order[..k].iter().map(|&j| weight[j]).sum();

    let mut agent_list = Vec::new();
    let mut offset = 0;
    for &s in &sizes {
        let lp = LinearProgram {
            cost: cost[offset..offset + s].to_vec(),
            ineq_matrix: vec![vec![1.0; s]],
            ineq_rhs: vec![s as f64],
            lower: vec![0.0; s],
            upper: vec![1.0; s],
        };
        agent_list.push(Agent::new(MixedIntegerProgram::continuous(lp), weight[offset..offset + s].to_vec()));
        offset += s;
    }
    let instance = MultiAgentInstance::new(budget, agent_list);

    // Every vertex of box-plus-one-halfspace has at most one fractional coordinate.
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let used: f64 = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| weight[j]).sum();
        let base: f64 = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| cost[j]).sum();
        if used <= budget + 1e-12 {
            best = best.min(base);
        }
        for j in (0..n).filter(|&j| mask >> j & 1 == 0) {
            let t = (budget - used) / weight[j];
            if (0.0..=1.0).contains(&t) {
                best = best.min(base + t * cost[j]);
            }
        }
    }
    (instance, best)
}

fn zero_violation_landing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut landed = 0;
    for i in 0..50 {
        let (instance, f_star) = flat_top_instance(&mut rng);
        let oracle = compose_oracle(&instance);
        let lambda_ref = warm_start(&instance);
        let cfg = DualBiConfig { interval_tol: INTERVAL_TOL, v_zero_tol: 1e-9, ..DualBiConfig::new(lambda_ref) };
        let r = solver::solve(&oracle, &cfg).unwrap();
        if r.status == DualBiStatus::OptimalZeroViolation {
            landed += 1;
        } else {
            failures.push(format!("instance {i}: status {:?}", r.status));
        }
        if (r.best.f_val - f_star).abs() > 1e-7 {
            failures.push(format!("instance {i}: cost {} vs enumerated {f_star}", r.best.f_val));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{landed} of 50 flat-top instances stopped at v=0; {} failures{}", failures.len(), first(&failures)),
    )
}

fn sampling_suite(sweep: &[SweepInstance]) -> Outcome {
    let tol = 1e-9;
    let mut failures = Vec::new();
    for s in sweep {
        let oracle = compose_oracle(&s.instance);
        let top = 2.0 * s.lambda_ref;
        let (lo, hi) = s.result.final_interval;
        let points: Vec<(f64, PrimalPoint<f64>)> = (0..50)
            .map(|i| {
                let l = top * i as f64 / 49.0;
                (l, oracle.minimize(l).unwrap())
            })
            .collect();
        for (l, p) in &points {
            if (*l < lo && p.v_val <= -tol) || (*l > hi && p.v_val >= tol) {
                failures.push(format!("seed {}: v={} at lambda={l}, interval [{lo}, {hi}]", s.seed, p.v_val));
            }
        }
        for w in points.windows(2) {
            if w[1].1.f_val < w[0].1.f_val - tol || w[1].1.v_val > w[0].1.v_val + tol {
                failures.push(format!("seed {}: monotonicity broken between lambda={} and {}", s.seed, w[0].0, w[1].0));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("100 seeds (m=20), 50 points on [0, 2 lambda_ref]; {} violations{}", failures.len(), first(&failures)),
    )
}

fn random_mip(rng: &mut ChaCha8Rng) -> MixedIntegerProgram<f64> {
    let n = rng.gen_range(1..=8);
    let ints = rng.gen_range(0..=n.min(3));
    let rows = rng.gen_range(1..=4);
    let lower: Vec<f64> = (0..n).map(|_| -(rng.gen_range(0..=5) as f64)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=5) as f64).collect();
    let lp = LinearProgram {
        cost: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ineq_matrix: (0..rows).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        ineq_rhs: (0..rows).map(|_| rng.gen_range(0.0..3.0)).collect(),
        lower,
        upper,
    };
    let mut mask = vec![false; n];
    for i in 0..ints {
        mask[i] = true;
    }
    for i in (1..n).rev() {
        mask.swap(i, rng.gen_range(0..=i));
    }
    MixedIntegerProgram::new(lp, mask)
}

fn milp_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for i in 0..200 {
        let mip = random_mip(&mut rng);
        let bb = branch_and_bound(&mip).unwrap();
        let bf = brute_force(&mip).unwrap();
        let ok = bb.status == MipStatus::Optimal
            && bf.status == MipStatus::Optimal
            && (bb.objective - bf.objective).abs() <= 1e-7
            && mip.is_feasible(&bb.x, 1e-9);
        if !ok {
            failures.push(format!("mip {i}: {:?} {} vs {:?} {}", bb.status, bb.objective, bf.status, bf.objective));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 60.0,
        format!("200 MIPs, {} mismatches{}; {secs:.1}s", failures.len(), first(&failures)),
    )
}

struct CompetitorRun {
    seed: u64,
    comparison: Comparison<f64>,
    max_iter: usize,
}

fn compare(instance: &MultiAgentInstance<f64>, max_iter: usize) -> Comparison<f64> {
    let bisection = DualBiConfig { interval_tol: INTERVAL_TOL, ..DualBiConfig::new(1.0) };
    let competitor = SubgradientConfig { max_iter, ..SubgradientConfig::new(0.0) }.scaled_for_agents(instance.num_agents());
    run_comparison(instance, &bisection, &competitor).unwrap()
}

fn competitor_runs() -> (Vec<(MultiAgentInstance<f64>, CompetitorRun)>, Vec<CompetitorRun>) {
    let mut short = Vec::new();
    let mut long = Vec::new();
    for seed in 0..50u64 {
        let instance: MultiAgentInstance<f64> = generate_instance(&GeneratorConfig::new(20, seed)).unwrap();
        let c = compare(&instance, 5000);
        // The scheme is deterministic, so a longer cap only changes runs that hit the shorter one.
        if seed < 20 {
            let c_long = if c.competitor.is_some() { c.clone() } else { compare(&instance, 20_000) };
            long.push(CompetitorRun { seed, comparison: c_long, max_iter: 20_000 });
        }
        short.push((instance, CompetitorRun { seed, comparison: c, max_iter: 5000 }));
    }
    (short, long)
}

fn parity(long: &[CompetitorRun]) -> Outcome {
    let mut failures = Vec::new();
    let mut fewer = 0;
    let mut secs = 0.0;
    let mut k_m = Vec::new();
    for run in long {
        let r = &run.comparison.report;
        secs += r.wall_time_dualbi + r.wall_time_competitor;
        match (r.f_dualbi, r.f_competitor, r.iters_dualbi, r.iters_competitor) {
            (Some(fd), Some(fc), Some(kd), Some(km)) => {
                if (fd - fc).abs() > 1e-6 * fd.abs().max(1.0) {
                    failures.push(format!("seed {}: f {fd} vs {fc}", run.seed));
                }
                if kd < km {
                    fewer += 1;
                }
                k_m.push(km);
            }
            _ => failures.push(format!(
                "seed {}: {:?} / {:?} (max_iter {})",
                run.seed, r.dualbi_error, r.competitor_error, run.max_iter
            )),
        }
    }
    let range = match (k_m.iter().min(), k_m.iter().max()) {
        (Some(a), Some(b)) => format!("{a}..{b}"),
        _ => "none".into(),
    };
    outcome(
        failures.is_empty() && fewer * 10 >= 9 * long.len() && secs < 600.0,
        format!(
            "20 seeds (m=20); cost parity failures {}{}; K_D < K_M on {fewer} of 20; K_M range {range}; {secs:.0}s",
            failures.len(),
            first(&failures)
        ),
    )
}

fn gap_sanity(short: &[(MultiAgentInstance<f64>, CompetitorRun)], long: &[CompetitorRun]) -> Outcome {
    let mut negative = Vec::new();
    let all = short.iter().map(|(_, r)| r).chain(long);
    for run in all {
        let r = &run.comparison.report;
        for d in [r.delta_f_pct, r.delta_f_pct_competitor].into_iter().flatten() {
            if d < 0.0 {
                negative.push(format!("seed {}: {d}", run.seed));
            }
        }
    }
    let mut gaps: Vec<f64> = long.iter().filter_map(|r| r.comparison.report.delta_f_pct).collect();
    gaps.sort_by(f64::total_cmp);
    let median = match gaps.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => gaps[n / 2],
        n => 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]),
    };
    outcome(
        negative.is_empty() && gaps.len() == 20 && median <= 0.10,
        format!(
            "negative gaps {}{}; median relative gap over 20 seeds (m=20) {median:.4e} ({:.3}%)",
            negative.len(),
            first(&negative),
            median * 100.0
        ),
    )
}

fn rho_halt(short: &[(MultiAgentInstance<f64>, CompetitorRun)]) -> Outcome {
    let mut no_feasible = Vec::new();
    let mut rho_nonzero = Vec::new();
    let mut other = 0;
    for (instance, run) in short {
        match &run.comparison.competitor {
            Some(c) => {
                let rho = check_rho_halt(&c.xi_feasible, instance).unwrap();
                if rho != 0.0 {
                    rho_nonzero.push(format!("seed {}: rho={rho}", run.seed));
                }
            }
            None => {
                let err = run.comparison.report.competitor_error.clone().unwrap_or_default();
                if err.starts_with("NoFeasibleIterate") {
                    no_feasible.push(format!("seed {}", run.seed));
                } else {
                    other += 1;
                }
            }
        }
    }
    outcome(
        no_feasible.is_empty() && rho_nonzero.is_empty(),
        format!(
            "50 seeds (m=20, max_iter 5000): NoFeasibleIterate {}{}, nonzero rho {}{}, other non-convergence {other}",
            no_feasible.len(),
            first(&no_feasible),
            rho_nonzero.len(),
            first(&rho_nonzero)
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |name: &str, o: Outcome| {
        all &= o.passed;
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    };
    let mut log = WarmStartLog { instances: 0, nonzero: Vec::new() };

    report("C1 incumbent feasibility, monotone cost, interval brackets dual maximisers", incumbent_suite(&mut log));
    let sweep = sweep_instances(&mut log);
    report("C2 bisection probe count", probe_count(&sweep));
    report("C3 warm start skips doubling", warm_start_check(&log));
    report("C4 zero-violation stop returns the optimal cost", zero_violation_landing());
    report("C5 sign pattern and monotonicity on a multiplier grid", sampling_suite(&sweep));
    drop(sweep);
    report("C6 branch and bound matches enumeration", milp_equivalence());
    let (short, long) = competitor_runs();
    report("C7 subgradient competitor parity", parity(&long));
    report("C8 relative gap sanity", gap_sanity(&short, &long));
    report("C9 competitor always finds a feasible iterate", rho_halt(&short));

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
