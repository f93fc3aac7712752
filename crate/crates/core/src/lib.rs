//! Lagrangian dual bisection for problems with a single complicating
//! constraint, with a dense MILP kernel, a multi-agent model, and a
//! projected-subgradient competitor.
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`). The
//! aliases at the crate root fix the scalar for the common cases.

pub mod error;
pub mod harness;
pub mod lagrangian;
pub mod milp;
pub mod multi_agent;
pub mod scalar;
pub mod solver;
pub mod subgradient;
pub mod verify;

pub use error::{Error, Result};
pub use harness::{delta_f_pct, generate_instance, run_comparison, ComparisonReport, GeneratorConfig};
pub use lagrangian::{evaluate_dual, DualEvaluation, DualFunction, FiniteOracle, LagrangianOracle, PrimalPoint};
pub use milp::{branch_and_bound, brute_force, simplex_solve, LinearProgram, MipSolution, MipStatus, MixedIntegerProgram};
pub use multi_agent::{agent_best_response, compose_oracle, Agent, AgentResponse, MultiAgentInstance, MultiAgentOracle};
pub use scalar::Scalar;
pub use solver::{doubling_phase, solve, DualBiConfig, DualBiResult, DualBiStatus};
pub use subgradient::{check_rho_halt, CompetitorResult, SubgradientConfig};

pub type PrimalPointF64 = PrimalPoint<f64>;
pub type LinearProgramF64 = LinearProgram<f64>;
pub type MixedIntegerProgramF64 = MixedIntegerProgram<f64>;
pub type MultiAgentInstanceF64 = MultiAgentInstance<f64>;
pub type DualBiConfigF64 = DualBiConfig<f64>;
pub type DualBiResultF64 = DualBiResult<f64>;
pub type SubgradientConfigF64 = SubgradientConfig<f64>;
pub type CompetitorResultF64 = CompetitorResult<f64>;

pub type PrimalPointF32 = PrimalPoint<f32>;
pub type LinearProgramF32 = LinearProgram<f32>;
pub type MixedIntegerProgramF32 = MixedIntegerProgram<f32>;
pub type MultiAgentInstanceF32 = MultiAgentInstance<f32>;
pub type DualBiConfigF32 = DualBiConfig<f32>;
pub type DualBiResultF32 = DualBiResult<f32>;
pub type SubgradientConfigF32 = SubgradientConfig<f32>;
pub type CompetitorResultF32 = CompetitorResult<f32>;
