//! Agents with private mixed-integer sets sharing one scalar budget.
//!
//! ```text
//! min  sum_i c_i · xi_i
//! s.t. sum_i A_i · xi_i - b <= 0
//!      xi_i in Xi_i = { G_i xi_i <= g_i, lower_i <= xi_i <= upper_i, some xi_ij integer }
//! ```
//!
//! For fixed `lambda` the Lagrangian splits into one small MILP per agent.
//! [`MultiAgentOracle`] solves those independently (in parallel by default)
//! and reassembles the joint minimizer.

use std::io::{Read, Write};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianOracle, PrimalPoint, TieBreak};
use crate::milp::{branch_and_bound, brute_force, MipStatus, MixedIntegerProgram};
use crate::scalar::{compensated_sum, dot, CompensatedSum, Scalar};

/// One agent. `local.lp.cost` is the agent's own cost vector `c_i`.
///
/// Serializes flat as `{cost, coupling_row, G, g, lower, upper, integer_mask}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent<T> {
    #[serde(flatten)]
    pub local: MixedIntegerProgram<T>,
    pub coupling_row: Vec<T>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(local: MixedIntegerProgram<T>, coupling_row: Vec<T>) -> Self {
        Self {
            local,
            coupling_row,
        }
    }

    pub fn cost(&self) -> &[T] {
        &self.local.lp.cost
    }

    pub fn num_vars(&self) -> usize {
        self.local.num_vars()
    }

    pub fn validate(&self) -> Result<()> {
        self.local.validate()?;
        if self.coupling_row.len() != self.num_vars() {
            return Err(Error::InvalidInput(format!(
                "coupling row has {} entries for {} variables",
                self.coupling_row.len(),
                self.num_vars()
            )));
        }
        if !self.coupling_row.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidInput("coupling row must be finite".into()));
        }
        Ok(())
    }

    pub fn local_cost(&self, xi: &[T]) -> T {
        dot(self.cost(), xi)
    }

    pub fn local_usage(&self, xi: &[T]) -> T {
        dot(&self.coupling_row, xi)
    }

    /// The local MILP with objective `(c_i + lambda A_i) · xi`.
    pub fn weighted_program(&self, lambda: T) -> MixedIntegerProgram<T> {
        let cost = self
            .cost()
            .iter()
            .zip(&self.coupling_row)
            .map(|(&c, &a)| c + lambda * a)
            .collect();
        self.local.with_cost(cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAgentInstance<T> {
    pub budget: T,
    pub agents: Vec<Agent<T>>,
}

impl<T: Scalar> MultiAgentInstance<T> {
    pub fn new(budget: T, agents: Vec<Agent<T>>) -> Self {
        Self { budget, agents }
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Length of the concatenated decision vector.
    pub fn dimension(&self) -> usize {
        self.agents.iter().map(Agent::num_vars).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidInput("instance has no agents".into()));
        }
        if !self.budget.is_finite() {
            return Err(Error::InvalidInput("budget must be finite".into()));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent
                .validate()
                .map_err(|e| Error::InvalidInput(format!("agent {i}: {e}")))?;
        }
        Ok(())
    }

    /// Splits a concatenated vector into per-agent blocks.
    pub fn blocks<'x>(&self, x: &'x [T]) -> Result<Vec<&'x [T]>> {
        if x.len() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "vector has length {}, instance dimension is {}",
                x.len(),
                self.dimension()
            )));
        }
        let mut rest = x;
        let mut out = Vec::with_capacity(self.agents.len());
        for agent in &self.agents {
            let (head, tail) = rest.split_at(agent.num_vars());
            out.push(head);
            rest = tail;
        }
        Ok(out)
    }

    /// `(f(x), v(x))` accumulated exactly as the oracle does.
    pub fn evaluate(&self, x: &[T]) -> Result<(T, T)> {
        let blocks = self.blocks(x)?;
        let costs = self.agents.iter().zip(&blocks).map(|(a, xi)| a.local_cost(xi));
        let usages = self.agents.iter().zip(&blocks).map(|(a, xi)| a.local_usage(xi));
        Ok((compensated_sum(costs), violation(usages, self.budget)))
    }

    pub fn point(&self, x: Vec<T>) -> Result<PrimalPoint<T>> {
        let (f, v) = self.evaluate(&x)?;
        Ok(PrimalPoint::new(x, f, v))
    }

    /// Whether each block lies in its agent's local set.
    pub fn locally_feasible(&self, x: &[T], tol: T) -> Result<bool> {
        let blocks = self.blocks(x)?;
        Ok(self
            .agents
            .iter()
            .zip(blocks)
            .all(|(a, xi)| a.local.is_feasible(xi, tol)))
    }
}

/// `sum usages - budget` in one compensated pass.
fn violation<T: Scalar>(usages: impl Iterator<Item = T>, budget: T) -> T {
    let mut acc = CompensatedSum::new();
    for u in usages {
        acc.add(u);
    }
    acc.add(-budget);
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse<T> {
    pub agent_index: usize,
    pub xi: Vec<T>,
    pub local_cost: T,
    pub local_usage: T,
}

/// Local MILP solver used for best responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LocalSolver {
    #[default]
    BranchAndBound,
    /// Enumerates every integer assignment; only for small integer boxes.
    BruteForce,
}

pub fn agent_best_response<T: Scalar>(
    agent: &Agent<T>,
    agent_index: usize,
    lambda: T,
) -> Result<AgentResponse<T>> {
    agent_best_response_with(agent, agent_index, lambda, LocalSolver::BranchAndBound)
}

/// Minimizes `(c_i + lambda A_i) · xi` over the agent's local set.
pub fn agent_best_response_with<T: Scalar>(
    agent: &Agent<T>,
    agent_index: usize,
    lambda: T,
    solver: LocalSolver,
) -> Result<AgentResponse<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "multiplier must be finite and nonnegative, got {lambda}"
        )));
    }
    let program = agent.weighted_program(lambda);
    let sol = match solver {
        LocalSolver::BranchAndBound => branch_and_bound(&program)?,
        LocalSolver::BruteForce => brute_force(&program)?,
    };
    match sol.status {
        MipStatus::Optimal => {}
        MipStatus::Infeasible => return Err(Error::LocalInfeasible { agent: agent_index }),
        MipStatus::Unbounded => {
            return Err(Error::OracleFailure(format!(
                "agent {agent_index} reported an unbounded local problem"
            )))
        }
    }
    Ok(AgentResponse {
        agent_index,
        local_cost: agent.local_cost(&sol.x),
        local_usage: agent.local_usage(&sol.x),
        xi: sol.x,
    })
}

/// One line of the response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord<T> {
    pub agent_index: usize,
    pub lambda: T,
    pub local_cost: T,
    pub local_usage: T,
}

/// Lagrangian oracle of a multi-agent instance.
pub struct MultiAgentOracle<'a, T> {
    instance: &'a MultiAgentInstance<T>,
    solver: LocalSolver,
    parallel: bool,
    log: Option<Mutex<Vec<ResponseRecord<T>>>>,
}

pub fn compose_oracle<T: Scalar>(instance: &MultiAgentInstance<T>) -> MultiAgentOracle<'_, T> {
    MultiAgentOracle::new(instance)
}

impl<'a, T: Scalar> MultiAgentOracle<'a, T> {
    pub fn new(instance: &'a MultiAgentInstance<T>) -> Self {
        Self {
            instance,
            solver: LocalSolver::BranchAndBound,
            parallel: true,
            log: None,
        }
    }

    pub fn with_solver(mut self, solver: LocalSolver) -> Self {
        self.solver = solver;
        self
    }

    /// Run agents one after another on the calling thread.
    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    /// Keep a record of every agent response.
    pub fn with_response_log(mut self) -> Self {
        self.log = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn instance(&self) -> &'a MultiAgentInstance<T> {
        self.instance
    }

    /// All agents' best responses at `lambda`, in agent order.
    pub fn responses(&self, lambda: T) -> Result<Vec<AgentResponse<T>>> {
        let solve = |(i, agent)| agent_best_response_with(agent, i, lambda, self.solver);
        let out: Vec<AgentResponse<T>> = if self.parallel {
            self.instance
                .agents
                .par_iter()
                .enumerate()
                .map(solve)
                .collect::<Result<_>>()?
        } else {
            self.instance
                .agents
                .iter()
                .enumerate()
                .map(solve)
                .collect::<Result<_>>()?
        };
        if let Some(log) = &self.log {
            let mut log = log.lock().expect("response log poisoned");
            log.extend(out.iter().map(|r| ResponseRecord {
                agent_index: r.agent_index,
                lambda,
                local_cost: r.local_cost,
                local_usage: r.local_usage,
            }));
        }
        Ok(out)
    }

    /// Recorded responses so far (empty unless the log is enabled).
    pub fn response_log(&self) -> Vec<ResponseRecord<T>> {
        self.log
            .as_ref()
            .map(|l| l.lock().expect("response log poisoned").clone())
            .unwrap_or_default()
    }
}

impl<T: Scalar> LagrangianOracle<T> for MultiAgentOracle<'_, T> {
    fn minimize(&self, lambda: T) -> Result<PrimalPoint<T>> {
        let responses = self.responses(lambda)?;
        let f = compensated_sum(responses.iter().map(|r| r.local_cost));
        let v = violation(responses.iter().map(|r| r.local_usage), self.instance.budget);
        let mut x = Vec::with_capacity(self.instance.dimension());
        for r in responses {
            x.extend(r.xi);
        }
        Ok(PrimalPoint::new(x, f, v))
    }

    fn tie_break(&self) -> TieBreak {
        match self.solver {
            LocalSolver::BranchAndBound => TieBreak::DepthFirstDownBranch,
            LocalSolver::BruteForce => TieBreak::LexicographicEnumeration,
        }
    }
}

pub fn read_instance_json<T: Scalar + for<'de> Deserialize<'de>, R: Read>(
    reader: R,
) -> Result<MultiAgentInstance<T>> {
    let instance: MultiAgentInstance<T> = serde_json::from_reader(reader)?;
    instance.validate()?;
    Ok(instance)
}

pub fn write_instance_json<T: Scalar + Serialize, W: Write>(
    instance: &MultiAgentInstance<T>,
    writer: W,
) -> Result<()> {
    serde_json::to_writer_pretty(writer, instance)?;
    Ok(())
}

/// Writes records as CSV with columns `agent_index,lambda,local_cost,local_usage`.
pub fn write_response_log_csv<T: Scalar, W: Write>(
    records: &[ResponseRecord<T>],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent_index", "lambda", "local_cost", "local_usage"])?;
    for r in records {
        w.write_record([
            r.agent_index.to_string(),
            r.lambda.to_string(),
            r.local_cost.to_string(),
            r.local_usage.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
