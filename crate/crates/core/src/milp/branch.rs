//! Depth-first branch-and-bound on the most fractional variable.

use super::simplex::{solve_with_bounds, SimplexOptions};
use super::{int_tol, MipSolution, MipStatus, MixedIntegerProgram};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct BranchOptions {
    pub node_limit: usize,
    pub simplex: SimplexOptions,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self {
            node_limit: 1_000_000,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchOutcome<T> {
    pub solution: MipSolution<T>,
    pub nodes: usize,
}

pub fn branch_and_bound<T: Scalar>(mip: &MixedIntegerProgram<T>) -> Result<MipSolution<T>> {
    branch_and_bound_with(mip, &BranchOptions::default()).map(|out| out.solution)
}

struct Node<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

/// Searches the tree depth first, exploring the down branch (`x_j <= floor`)
/// before the up branch.
///
/// An integral leaf replaces the incumbent only when strictly better, so
/// among equal-cost solutions the first one met in that order is returned.
/// Integer coordinates of the result are exact integers; the continuous part
/// comes from re-solving the LP with those integers fixed, which is the same
/// residual LP [`super::brute_force`] solves for that assignment.
pub fn branch_and_bound_with<T: Scalar>(
    mip: &MixedIntegerProgram<T>,
    options: &BranchOptions,
) -> Result<BranchOutcome<T>> {
    mip.validate()?;
    let lp = &mip.lp;
    let ints: Vec<usize> = mip.integer_indices().collect();

    let mut stack = vec![Node {
        lower: lp.lower.clone(),
        upper: lp.upper.clone(),
    }];
    let mut incumbent: Option<MipSolution<T>> = None;
    let mut nodes = 0usize;

    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > options.node_limit {
            return Err(Error::NodeLimitExceeded {
                limit: options.node_limit,
            });
        }

        let relaxed = solve_with_bounds(lp, &node.lower, &node.upper, &options.simplex)?.solution;
        match relaxed.status {
            MipStatus::Infeasible => continue,
            // Bounded boxes cannot produce this; surface it rather than loop.
            MipStatus::Unbounded => return Ok(BranchOutcome { solution: relaxed, nodes }),
            MipStatus::Optimal => {}
        }
        if let Some(best) = &incumbent {
            if relaxed.objective >= best.objective - T::rel_tie(best.objective) {
                continue;
            }
        }

        match most_fractional(&relaxed.x, &ints) {
            Some(j) => {
                let v = relaxed.x[j];
                let mut up = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                up.lower[j] = v.ceil();
                let mut down = node;
                down.upper[j] = v.floor();
                stack.push(up);
                stack.push(down);
            }
            None => {
                let leaf = integral_leaf(mip, relaxed, &ints, &options.simplex)?;
                let better = match &incumbent {
                    None => true,
                    Some(best) => leaf.objective < best.objective - T::rel_tie(best.objective),
                };
                if better {
                    incumbent = Some(leaf);
                }
            }
        }
    }

    Ok(BranchOutcome {
        solution: incumbent.unwrap_or_else(MipSolution::infeasible),
        nodes,
    })
}

/// Integer variable whose relaxation value is farthest from an integer;
/// lowest index wins ties. `None` when the point is integral.
fn most_fractional<T: Scalar>(x: &[T], ints: &[usize]) -> Option<usize> {
    let tol = int_tol::<T>();
    let mut best: Option<(usize, T)> = None;
    for &j in ints {
        let frac = x[j] - x[j].floor();
        let dist = frac.min(T::one() - frac);
        if dist <= tol {
            continue;
        }
        if best.map_or(true, |(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn integral_leaf<T: Scalar>(
    mip: &MixedIntegerProgram<T>,
    relaxed: MipSolution<T>,
    ints: &[usize],
    simplex: &SimplexOptions,
) -> Result<MipSolution<T>> {
    if ints.is_empty() {
        return Ok(relaxed);
    }
    let lp = &mip.lp;
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    for &j in ints {
        let z = relaxed.x[j].round();
        lower[j] = z;
        upper[j] = z;
    }
    let fixed = solve_with_bounds(lp, &lower, &upper, simplex)?.solution;
    if fixed.is_optimal() {
        return Ok(fixed);
    }
    // The relaxation was feasible within tolerance; keep it with snapped integers.
    let mut x = relaxed.x;
    for &j in ints {
        x[j] = x[j].round();
    }
    let objective = lp.objective(&x);
    Ok(MipSolution::optimal(x, objective))
}
