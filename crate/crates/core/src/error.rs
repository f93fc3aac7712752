use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure a solver in this crate can report.
///
/// Numeric payloads are widened to `f64` so the error type does not depend
/// on the scalar the failing solver was instantiated with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("oracle could not produce a minimizer: {0}")]
    OracleFailure(String),

    #[error("warm-start point is not strictly feasible (v = {v})")]
    NotStrictlyFeasible { v: f64 },

    #[error(
        "warm-start multiplier {lambda_ref} is not positive; the complicating constraint looks redundant"
    )]
    NonPositiveLambdaRef { lambda_ref: f64, redundant: bool },

    #[error("no feasible probe after {doublings} doublings (last lambda {lambda_hi}, v = {v})")]
    InfeasibleSuspected {
        doublings: usize,
        lambda_hi: f64,
        v: f64,
    },

    #[error("simplex stopped after {pivots} pivots without reaching optimality")]
    NumericalBreakdown { pivots: usize },

    #[error("branch-and-bound explored more than {limit} nodes")]
    NodeLimitExceeded { limit: usize },

    #[error("integer enumeration of {count} assignments exceeds the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("local feasible set of agent {agent} is empty")]
    LocalInfeasible { agent: usize },

    #[error("no stored subgradient iterate is feasible after {iterations} iterations")]
    NoFeasibleIterate { iterations: usize },

    #[error("subgradient scheme did not converge within {iterations} iterations")]
    DidNotConverge { iterations: usize },

    #[error("could not draw a non-redundant instance in {attempts} attempts")]
    NonRedundancyUnattainable { attempts: usize },

    #[error("dual value {phi_star} is too close to zero for a relative gap")]
    DegenerateDual { phi_star: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::OracleFailure(_) => "OracleFailure",
            Error::NotStrictlyFeasible { .. } => "NotStrictlyFeasible",
            Error::NonPositiveLambdaRef { .. } => "NonPositiveLambdaRef",
            Error::InfeasibleSuspected { .. } => "InfeasibleSuspected",
            Error::NumericalBreakdown { .. } => "NumericalBreakdown",
            Error::NodeLimitExceeded { .. } => "NodeLimitExceeded",
            Error::EnumerationTooLarge { .. } => "EnumerationTooLarge",
            Error::LocalInfeasible { .. } => "LocalInfeasible",
            Error::NoFeasibleIterate { .. } => "NoFeasibleIterate",
            Error::DidNotConverge { .. } => "DidNotConverge",
            Error::NonRedundancyUnattainable { .. } => "NonRedundancyUnattainable",
            Error::DegenerateDual { .. } => "DegenerateDual",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
