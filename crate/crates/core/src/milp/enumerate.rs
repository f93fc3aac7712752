//! Exhaustive enumeration over integer assignments.

use super::simplex::{solve_with_bounds, SimplexOptions};
use super::{MipSolution, MipStatus, MixedIntegerProgram};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    /// Largest number of integer assignments that will be visited.
    pub cap: u128,
    pub simplex: SimplexOptions,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            cap: 1_000_000,
            simplex: SimplexOptions::default(),
        }
    }
}

pub fn brute_force<T: Scalar>(mip: &MixedIntegerProgram<T>) -> Result<MipSolution<T>> {
    brute_force_with(mip, &EnumerationOptions::default())
}

/// Visits every integer assignment in lexicographic order (first integer
/// variable most significant), solves the residual LP over the continuous
/// variables, and keeps the first strictly best result.
pub fn brute_force_with<T: Scalar>(
    mip: &MixedIntegerProgram<T>,
    options: &EnumerationOptions,
) -> Result<MipSolution<T>> {
    mip.validate()?;
    let lp = &mip.lp;
    let ints: Vec<usize> = mip.integer_indices().collect();

    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| {
            let lo = lp.lower[j].ceil().to_i64().unwrap_or(i64::MIN);
            let hi = lp.upper[j].floor().to_i64().unwrap_or(i64::MAX);
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(MipSolution::infeasible());
    }
    let count = ranges
        .iter()
        .try_fold(1u128, |acc, &(lo, hi)| acc.checked_mul((hi - lo + 1) as u128))
        .unwrap_or(u128::MAX);
    if count > options.cap {
        return Err(Error::EnumerationTooLarge {
            count,
            cap: options.cap,
        });
    }

    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let mut current: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
    let mut best: Option<MipSolution<T>> = None;

    loop {
        for (k, &j) in ints.iter().enumerate() {
            let z = T::from_i64(current[k]).expect("integer bound fits the scalar type");
            lower[j] = z;
            upper[j] = z;
        }
        let sol = solve_with_bounds(lp, &lower, &upper, &options.simplex)?.solution;
        if sol.status == MipStatus::Optimal {
            let better = match &best {
                None => true,
                Some(b) => sol.objective < b.objective - T::rel_tie(b.objective),
            };
            if better {
                best = Some(sol);
            }
        }

        // Odometer step: the last integer variable varies fastest.
        let mut k = ints.len();
        loop {
            if k == 0 {
                return Ok(best.unwrap_or_else(MipSolution::infeasible));
            }
            k -= 1;
            if current[k] < ranges[k].1 {
                current[k] += 1;
                break;
            }
            current[k] = ranges[k].0;
        }
    }
}
