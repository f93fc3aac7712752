//! Exact kernel for small dense mixed-integer linear programs.
//!
//! Every problem here has the form
//!
//! ```text
//! min  cost · x
//! s.t. G x <= g
//!      lower <= x <= upper      (all bounds finite)
//!      x_j integer where integer_mask[j]
//! ```
//!
//! Three solvers share this representation: a dense two-phase simplex for
//! the continuous relaxation, a depth-first branch-and-bound, and an
//! exhaustive enumeration over integer assignments that serves as ground
//! truth for the other two.

mod branch;
mod enumerate;
mod simplex;

pub use branch::{branch_and_bound, branch_and_bound_with, BranchOptions, BranchOutcome};
pub use enumerate::{brute_force, brute_force_with, EnumerationOptions};
pub use simplex::{simplex_solve, simplex_solve_with, LpCertificate, LpOutcome, SimplexOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Continuous linear program with finite box bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram<T> {
    pub cost: Vec<T>,
    #[serde(rename = "G")]
    pub ineq_matrix: Vec<Vec<T>>,
    #[serde(rename = "g")]
    pub ineq_rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Checks dimensions, finiteness and `lower <= upper`.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInput(format!(
                "bounds have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        if self.ineq_matrix.len() != self.ineq_rhs.len() {
            return Err(Error::InvalidInput(format!(
                "G has {} rows but g has {} entries",
                self.ineq_matrix.len(),
                self.ineq_rhs.len()
            )));
        }
        if let Some(i) = self.ineq_matrix.iter().position(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "row {i} of G does not have {n} columns"
            )));
        }
        let all_finite = self
            .cost
            .iter()
            .chain(self.ineq_rhs.iter())
            .chain(self.lower.iter())
            .chain(self.upper.iter())
            .chain(self.ineq_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput(
                "all coefficients and bounds must be finite".into(),
            ));
        }
        if let Some(j) = (0..n).find(|&j| self.lower[j] > self.upper[j]) {
            return Err(Error::InvalidInput(format!(
                "lower bound exceeds upper bound for variable {j}"
            )));
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        let rows = self
            .ineq_matrix
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(row, &rhs)| dot(row, x) - rhs);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(&xj, (&l, &u))| [l - xj, xj - u]);
        rows.chain(bounds).fold(T::zero(), T::max)
    }

    pub fn objective(&self, x: &[T]) -> T {
        dot(&self.cost, x)
    }
}

/// Linear program plus integrality marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedIntegerProgram<T> {
    #[serde(flatten)]
    pub lp: LinearProgram<T>,
    pub integer_mask: Vec<bool>,
}

impl<T: Scalar> MixedIntegerProgram<T> {
    pub fn new(lp: LinearProgram<T>, integer_mask: Vec<bool>) -> Self {
        Self { lp, integer_mask }
    }

    /// Purely continuous program.
    pub fn continuous(lp: LinearProgram<T>) -> Self {
        let n = lp.num_vars();
        Self::new(lp, vec![false; n])
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn integer_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.integer_mask
            .iter()
            .enumerate()
            .filter_map(|(j, &is_int)| is_int.then_some(j))
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if self.integer_mask.len() != self.num_vars() {
            return Err(Error::InvalidInput(format!(
                "integer_mask has {} entries for {} variables",
                self.integer_mask.len(),
                self.num_vars()
            )));
        }
        for j in self.integer_indices() {
            let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
            if l != l.round() || u != u.round() {
                return Err(Error::InvalidInput(format!(
                    "integer variable {j} has non-integral bounds"
                )));
            }
        }
        Ok(())
    }

    /// Same feasible set, different objective.
    pub fn with_cost(&self, cost: Vec<T>) -> Self {
        debug_assert_eq!(cost.len(), self.num_vars());
        let mut out = self.clone();
        out.lp.cost = cost;
        out
    }

    /// Largest violation of rows, bounds, and integrality at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let integrality = self
            .integer_indices()
            .map(|j| (x[j] - x[j].round()).abs())
            .fold(T::zero(), T::max);
        self.lp.max_violation(x).max(integrality)
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        x.len() == self.num_vars() && self.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of any of the kernel's solvers.
///
/// `x` is empty and `objective` is `+inf` unless the status is `Optimal`.
#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution<T> {
    pub status: MipStatus,
    pub x: Vec<T>,
    pub objective: T,
}

impl<T: Scalar> MipSolution<T> {
    pub(crate) fn optimal(x: Vec<T>, objective: T) -> Self {
        Self {
            status: MipStatus::Optimal,
            x,
            objective,
        }
    }

    pub(crate) fn infeasible() -> Self {
        Self {
            status: MipStatus::Infeasible,
            x: Vec::new(),
            objective: T::infinity(),
        }
    }

    pub(crate) fn unbounded() -> Self {
        Self {
            status: MipStatus::Unbounded,
            x: Vec::new(),
            objective: T::neg_infinity(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == MipStatus::Optimal
    }
}

/// Integer tolerance used to decide whether a relaxation value is integral.
pub(crate) fn int_tol<T: Scalar>() -> T {
    T::feas_tol() * T::lit(100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> LinearProgram<f64> {
        LinearProgram {
            cost: vec![1.0, -1.0],
            ineq_matrix: vec![vec![1.0, 1.0]],
            ineq_rhs: vec![1.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }

    #[test]
    fn json_uses_flat_schema() {
        let mip = MixedIntegerProgram::new(unit_box(), vec![false, true]);
        let json = serde_json::to_value(&mip).unwrap();
        for key in ["cost", "G", "g", "lower", "upper", "integer_mask"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: MixedIntegerProgram<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, mip);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut lp = unit_box();
        lp.lower.pop();
        assert!(lp.validate().is_err());

        let mut lp = unit_box();
        lp.upper[0] = f64::INFINITY;
        assert!(lp.validate().is_err());

        let mut lp = unit_box();
        lp.lower[1] = 2.0;
        assert!(lp.validate().is_err());

        let mut lp = unit_box();
        lp.upper[1] = 0.5;
        assert!(MixedIntegerProgram::new(lp, vec![false, true]).validate().is_err());
    }

    #[test]
    fn violation_accounts_for_integrality() {
        let mip = MixedIntegerProgram::new(unit_box(), vec![false, true]);
        assert_eq!(mip.max_violation(&[0.5, 0.0]), 0.0);
        assert!((mip.max_violation(&[0.0, 0.25]) - 0.25).abs() < 1e-15);
        assert!((mip.max_violation(&[0.75, 1.0]) - 0.75).abs() < 1e-15);
    }
}
