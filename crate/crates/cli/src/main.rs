//! `dualbi` command-line tool.
//!
//! Exit codes: 0 on success, 1 when a method fails (a JSON object
//! `{"error": kind, "message": text}` goes to standard error), 2 on bad flags.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dualbi::harness::{self, table_markdown, write_table_csv, Comparison, GeneratorConfig, TableRow};
use dualbi::multi_agent::{read_instance_json, write_instance_json, MultiAgentInstance};
use dualbi::solver::{self, DualBiConfig, DualBiResult};
use dualbi::subgradient::{self, SubgradientConfig};
use dualbi::verify::{verify_instance, VerifyOptions};
use dualbi::{compose_oracle, DualFunction, Error, Scalar};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dualbi", version, about = "Dual bisection for single-constraint Lagrangian problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random multi-agent instance.
    Gen(GenArgs),
    /// Run the dual bisection on an instance.
    Solve(SolveArgs),
    /// Run the bisection and the subgradient scheme on the same instance.
    Compare(CompareArgs),
    /// Sweep agent counts and seeds and tabulate both methods.
    Bench(BenchArgs),
    /// Check solver invariants on an instance against enumeration.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GeneratorArgs {
    /// Continuous variables per agent.
    #[arg(long, default_value_t = 5)]
    n_c: usize,
    /// Integer variables per agent.
    #[arg(long, default_value_t = 3)]
    n_d: usize,
    /// Bound magnitude for every variable.
    #[arg(long = "box", default_value_t = 10.0, value_parser = positive)]
    box_bound: f64,
    /// Separate bound magnitude for the integer variables.
    #[arg(long)]
    int_box: Option<f64>,
    /// Local constraint rows per agent.
    #[arg(long, default_value_t = 10)]
    rows: usize,
    /// Budget as a fraction of the uncoupled usage.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    budget_fraction: f64,
    /// Allow a budget fraction of 1 or more (redundant coupling).
    #[arg(long)]
    allow_redundant: bool,
}

impl GeneratorArgs {
    fn config(&self, m: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_c: self.n_c,
            n_d: self.n_d,
            box_bound: self.box_bound,
            int_box: self.int_box,
            rows: self.rows,
            budget_fraction: self.budget_fraction,
            allow_redundant: self.allow_redundant,
            ..GeneratorConfig::new(m, seed)
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    agents: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BisectionArgs {
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    interval_tol: f64,
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    v_zero_tol: f64,
    #[arg(long, default_value_t = 64)]
    max_doubling: usize,
    #[arg(long, default_value_t = 200)]
    max_bisection: usize,
}

impl BisectionArgs {
    fn config<T: Scalar>(&self, lambda_ref: T) -> DualBiConfig<T> {
        DualBiConfig {
            interval_tol: T::lit(self.interval_tol),
            v_zero_tol: T::lit(self.v_zero_tol),
            max_doubling: self.max_doubling,
            max_bisection: self.max_bisection,
            ..DualBiConfig::new(lambda_ref)
        }
    }
}

#[derive(Args, Clone)]
struct CompetitorArgs {
    /// Step scale, tuned for 100 agents.
    #[arg(long, default_value_t = 7e-4, value_parser = positive)]
    alpha_bar: f64,
    /// Use `--alpha-bar` as given instead of adapting it to the agent count.
    #[arg(long)]
    no_alpha_scale: bool,
    /// Convergence window length.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    w: u64,
    /// Threshold on successive multiplier changes.
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    conv_tol: f64,
    /// Threshold on successive changes of the averaged primal iterate.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    avg_tol: f64,
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
}

impl CompetitorArgs {
    fn config<T: Scalar>(&self, m: usize) -> SubgradientConfig<T> {
        let cfg = SubgradientConfig {
            alpha_bar: T::lit(self.alpha_bar),
            conv_tol: T::lit(self.conv_tol),
            avg_tol: T::lit(self.avg_tol),
            window_w: self.w as usize,
            max_iter: self.max_iter as usize,
            lambda0: T::zero(),
        };
        if self.no_alpha_scale {
            cfg
        } else {
            cfg.scaled_for_agents(m)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    bisection: BisectionArgs,
    /// Initial upper multiplier; warm-started from the zero point when omitted.
    #[arg(long, value_parser = positive)]
    lambda_ref: Option<f64>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// Result JSON path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration trace CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    bisection: BisectionArgs,
    #[command(flatten)]
    competitor: CompetitorArgs,
    /// Report JSON path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the two trace CSVs.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated agent counts.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    agents: Vec<u64>,
    /// Seeds per agent count.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    bisection: BisectionArgs,
    #[command(flatten)]
    competitor: CompetitorArgs,
    /// Table CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Markdown table path.
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Directory for generated instances and per-run traces.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Zero the wall-clock columns so output depends on the seeds only.
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
    grid: u64,
    #[arg(long, default_value_t = 1e-7, value_parser = positive)]
    tol: f64,
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    interval_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a nonnegative number, got {s}"))
    }
}

/// Failure reported as `{"error": kind, "message": text}`.
struct Failure {
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => match args.precision {
            Precision::F64 => solve::<f64>(args),
            Precision::F32 => solve::<f32>(args),
        },
        Command::Compare(args) => compare(args),
        Command::Bench(args) => bench(args),
        Command::Verify(args) => verify(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(1)
        }
    }
}

/// Opens `path` for writing, or standard output when `None`.
fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<V: Serialize>(path: Option<&Path>, value: &V) -> CliResult {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load<T: Scalar + DeserializeOwned>(path: &Path) -> CliResult<MultiAgentInstance<T>> {
    Ok(read_instance_json(BufReader::new(File::open(path)?))?)
}

fn timestamp(suppress: bool) -> Option<u64> {
    if suppress {
        return None;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn gen(args: GenArgs) -> CliResult {
    let cfg = args.generator.config(args.agents as usize, args.seed);
    let instance: MultiAgentInstance<f64> = harness::generate_instance(&cfg)?;
    let mut w = sink(args.out.as_deref())?;
    write_instance_json(&instance, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Warm start from the zero point, which lies in every generated local set.
fn warm_lambda_ref<T: Scalar>(instance: &MultiAgentInstance<T>) -> CliResult<T> {
    let zero = vec![T::zero(); instance.dimension()];
    if !instance.locally_feasible(&zero, T::zero())? {
        return Err(Failure {
            kind: "InvalidInput".into(),
            message: "the zero point is not in every local set; pass --lambda-ref".into(),
        });
    }
    let oracle = compose_oracle(instance);
    let dual = DualFunction::new(&oracle);
    Ok(dual.warm_start_lambda_ref(&instance.point(zero)?)?)
}

fn result_json<T: Scalar + Serialize>(r: &DualBiResult<T>, ts: Option<u64>) -> Value {
    let mut v = json!({
        "status": r.status,
        "best_f": r.best.f_val,
        "best_v": r.best.v_val,
        "best_x": r.best.x,
        "lambda_ref": r.lambda_ref,
        "doublings": r.doublings,
        "bisections": r.bisections,
        "iterations": r.iterations(),
        "final_interval": [r.final_interval.0, r.final_interval.1],
        "lambda_certificate": r.lambda_certificate,
        "best_dual": { "lambda": r.best_dual.0, "phi": r.best_dual.1 },
    });
    if let Some(ts) = ts {
        v["timestamp"] = json!(ts);
    }
    v
}

fn solve<T: Scalar + Serialize + DeserializeOwned>(args: SolveArgs) -> CliResult {
    let instance: MultiAgentInstance<T> = load(&args.input)?;
    let lambda_ref = match args.lambda_ref {
        Some(l) => T::lit(l),
        None => warm_lambda_ref(&instance)?,
    };
    let oracle = compose_oracle(&instance);
    let result = solver::solve(&oracle, &args.bisection.config(lambda_ref))?;
    if let Some(path) = &args.trace {
        solver::write_trace_csv(&result, sink(Some(path))?)?;
    }
    write_json(args.out.as_deref(), &result_json(&result, timestamp(args.no_timestamps)))
}

fn comparison<T: Scalar>(
    instance: &MultiAgentInstance<T>,
    bisection: &BisectionArgs,
    competitor: &CompetitorArgs,
) -> dualbi::Result<Comparison<T>> {
    harness::run_comparison(
        instance,
        &bisection.config(T::one()),
        &competitor.config(instance.num_agents()),
    )
}

fn write_traces<T: Scalar>(dir: &Path, stem: &str, c: &Comparison<T>) -> CliResult {
    fs::create_dir_all(dir)?;
    if let Some(r) = &c.dualbi {
        solver::write_trace_csv(r, sink(Some(&dir.join(format!("{stem}dualbi_trace.csv"))))?)?;
    }
    if let Some(r) = &c.competitor {
        subgradient::write_trace_csv(&r.trace, sink(Some(&dir.join(format!("{stem}competitor_trace.csv"))))?)?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> CliResult {
    let instance: MultiAgentInstance<f64> = load(&args.input)?;
    let mut c = comparison(&instance, &args.bisection, &args.competitor)?;
    if let Some(dir) = &args.trace_dir {
        write_traces(dir, "", &c)?;
    }
    if args.no_timestamps {
        c.report.wall_time_dualbi = 0.0;
        c.report.wall_time_competitor = 0.0;
    }
    let mut v = serde_json::to_value(&c.report)?;
    if let Some(ts) = timestamp(args.no_timestamps) {
        v["timestamp"] = json!(ts);
    }
    write_json(args.out.as_deref(), &v)
}

fn bench(args: BenchArgs) -> CliResult {
    let runs: Vec<(usize, u64)> = args
        .agents
        .iter()
        .flat_map(|&m| (0..args.seeds).map(move |k| (m as usize, args.seed + k)))
        .collect();
    let rows: Vec<TableRow> = runs
        .par_iter()
        .map(|&(m, seed)| -> CliResult<TableRow> {
            let instance: MultiAgentInstance<f64> =
                harness::generate_instance(&args.generator.config(m, seed))?;
            let c = comparison(&instance, &args.bisection, &args.competitor)?;
            if let Some(dir) = &args.artifacts {
                let stem = format!("m{m}_seed{seed}_");
                fs::create_dir_all(dir)?;
                write_instance_json(&instance, sink(Some(&dir.join(format!("{stem}instance.json"))))?)?;
                write_traces(dir, &stem, &c)?;
            }
            let mut row = TableRow::from_report(seed, &c.report);
            if args.no_timestamps {
                row.wall_time_dualbi = 0.0;
                row.wall_time_competitor = 0.0;
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    write_table_csv(&rows, sink(args.out.as_deref())?)?;
    if let Some(path) = &args.markdown {
        let mut w = sink(Some(path))?;
        w.write_all(table_markdown(&rows).as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    let instance: MultiAgentInstance<f64> = load(&args.input)?;
    let options = VerifyOptions {
        grid_points: args.grid as usize,
        tol: args.tol,
        interval_tol: args.interval_tol,
    };
    let report = verify_instance(&instance, &options)?;
    write_json(args.out.as_deref(), &report)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure {
            kind: "VerificationFailed".into(),
            message: failed.join("; "),
        })
    }
}
