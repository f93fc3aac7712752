//! Dense two-phase tableau simplex for box-bounded LPs.
//!
//! Variables are shifted to `y = x - lower`, so every column is
//! nonnegative and the upper bounds become explicit rows `y_j <= u_j - l_j`.
//! Rows with a negative shifted right-hand side get an artificial variable
//! and are driven feasible in phase one.
//!
//! Pricing is Dantzig's most-negative reduced cost. After a streak of
//! `2 (n + r)` degenerate pivots the phase switches permanently to Bland's
//! rule, which cannot cycle. Ties are always broken toward the lowest column
//! (entering) or lowest basic variable (leaving), so the returned vertex is a
//! deterministic function of the input.

use super::{LinearProgram, MipSolution};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexOptions {
    /// Pivot budget across both phases; `None` means `50 (n + r)`.
    pub pivot_limit: Option<usize>,
}

/// Final basis and reduced costs of an optimal solve.
///
/// Columns are ordered structural variables first (in the shifted space),
/// then one slack per row of `G`, then one slack per upper bound.
#[derive(Debug, Clone)]
pub struct LpCertificate<T> {
    pub basis: Vec<usize>,
    pub reduced_costs: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LpOutcome<T> {
    pub solution: MipSolution<T>,
    /// Present only when the status is `Optimal`.
    pub certificate: Option<LpCertificate<T>>,
    pub pivots: usize,
}

/// Solves `lp` with default options.
pub fn simplex_solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<MipSolution<T>> {
    simplex_solve_with(lp, &SimplexOptions::default()).map(|out| out.solution)
}

pub fn simplex_solve_with<T: Scalar>(
    lp: &LinearProgram<T>,
    options: &SimplexOptions,
) -> Result<LpOutcome<T>> {
    lp.validate()?;
    solve_with_bounds(lp, &lp.lower, &lp.upper, options)
}

/// Solves `lp` with its bounds replaced by `lower`/`upper`.
///
/// The caller guarantees the replacement bounds are finite; empty boxes are
/// reported as infeasible.
pub(crate) fn solve_with_bounds<T: Scalar>(
    lp: &LinearProgram<T>,
    lower: &[T],
    upper: &[T],
    options: &SimplexOptions,
) -> Result<LpOutcome<T>> {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(LpOutcome {
            solution: MipSolution::infeasible(),
            certificate: None,
            pivots: 0,
        });
    }
    let n = lp.num_vars();
    let r = lp.num_rows();
    let limit = options.pivot_limit.unwrap_or(50 * (n + r).max(1));

    let mut tab = Tableau::build(lp, lower, upper);
    let mut pivots = 0usize;

    if tab.num_artificial() > 0 {
        tab.load_phase_one_objective();
        // Phase one minimizes a sum bounded below by zero; it cannot be unbounded.
        tab.run(limit, &mut pivots)?;
        let infeasibility = -tab.objective_rhs();
        let scale = T::one() + tab.max_rhs();
        if infeasibility > T::feas_tol() * scale {
            return Ok(LpOutcome {
                solution: MipSolution::infeasible(),
                certificate: None,
                pivots,
            });
        }
        tab.expel_artificials();
    }

    tab.load_phase_two_objective(&lp.cost);
    if tab.run(limit, &mut pivots)? == PhaseEnd::Unbounded {
        return Ok(LpOutcome {
            solution: MipSolution::unbounded(),
            certificate: None,
            pivots,
        });
    }

    let x = tab.primal(lower, upper);
    let objective = dot(&lp.cost, &x);
    let certificate = LpCertificate {
        basis: tab.basis.clone(),
        reduced_costs: (0..tab.first_art).map(|j| tab.obj(j)).collect(),
    };
    Ok(LpOutcome {
        solution: MipSolution::optimal(x, objective),
        certificate: Some(certificate),
        pivots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau<T> {
    /// Constraint rows; the objective row is stored after them.
    rows: usize,
    /// Variable columns; the right-hand side is stored after them.
    cols: usize,
    n_struct: usize,
    /// Columns at or beyond this index are artificial and never re-enter.
    first_art: usize,
    data: Vec<T>,
    basis: Vec<usize>,
    art_rows: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>, lower: &[T], upper: &[T]) -> Self {
        let n = lp.num_vars();
        let r = lp.num_rows();
        let rows = r + n;

        // Shifted right-hand sides: g - G l for the G rows, u - l for bounds.
        let mut rhs: Vec<T> = lp
            .ineq_matrix
            .iter()
            .zip(&lp.ineq_rhs)
            .map(|(row, &g)| g - dot(row, lower))
            .collect();
        rhs.extend(upper.iter().zip(lower).map(|(&u, &l)| u - l));

        let art_rows: Vec<usize> = (0..rows).filter(|&i| rhs[i] < T::zero()).collect();
        let first_art = n + rows;
        let cols = first_art + art_rows.len();

        let mut tab = Self {
            rows,
            cols,
            n_struct: n,
            first_art,
            data: vec![T::zero(); (rows + 1) * (cols + 1)],
            basis: (n..n + rows).collect(),
            art_rows: art_rows.clone(),
        };

        for (i, row) in lp.ineq_matrix.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                tab.set(i, j, a);
            }
        }
        for j in 0..n {
            tab.set(r + j, j, T::one());
        }
        for i in 0..rows {
            tab.set(i, n + i, T::one());
            tab.set(i, cols, rhs[i]);
        }
        for (k, &i) in art_rows.iter().enumerate() {
            for j in 0..=cols {
                let v = tab.at(i, j);
                tab.set(i, j, -v);
            }
            tab.set(i, first_art + k, T::one());
            tab.basis[i] = first_art + k;
        }
        tab
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.cols + 1) + j
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    fn obj(&self, j: usize) -> T {
        self.at(self.rows, j)
    }

    fn rhs(&self, i: usize) -> T {
        self.at(i, self.cols)
    }

    fn objective_rhs(&self) -> T {
        self.at(self.rows, self.cols)
    }

    fn num_artificial(&self) -> usize {
        self.art_rows.len()
    }

    fn max_rhs(&self) -> T {
        (0..self.rows)
            .map(|i| self.rhs(i).abs())
            .fold(T::zero(), T::max)
    }

    /// Objective row holds reduced costs; its last entry is minus the value.
    fn load_phase_one_objective(&mut self) {
        let rows = self.rows;
        for j in 0..=self.cols {
            self.set(rows, j, T::zero());
        }
        for k in 0..self.art_rows.len() {
            let i = self.art_rows[k];
            for j in 0..=self.cols {
                if j >= self.first_art && j < self.cols {
                    continue;
                }
                let v = self.obj(j) - self.at(i, j);
                self.set(rows, j, v);
            }
        }
    }

    fn load_phase_two_objective(&mut self, cost: &[T]) {
        let rows = self.rows;
        let col_cost = |j: usize| {
            if j < self.n_struct {
                cost[j]
            } else {
                T::zero()
            }
        };
        let mut row = vec![T::zero(); self.cols + 1];
        for (j, slot) in row.iter_mut().enumerate().take(self.cols) {
            *slot = col_cost(j);
        }
        for i in 0..self.rows {
            let cb = col_cost(self.basis[i]);
            if cb == T::zero() {
                continue;
            }
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = *slot - cb * self.at(i, j);
            }
        }
        for (j, v) in row.into_iter().enumerate() {
            self.set(rows, j, v);
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let p = self.at(pr, pc);
        let start = pr * width;
        for j in 0..width {
            self.data[start + j] = self.data[start + j] / p;
        }
        self.data[start + pc] = T::one();
        let pivot_row: Vec<T> = self.data[start..start + width].to_vec();
        for i in 0..=self.rows {
            if i == pr {
                continue;
            }
            let base = i * width;
            let factor = self.data[base + pc];
            if factor == T::zero() {
                continue;
            }
            for (j, &pv) in pivot_row.iter().enumerate() {
                if pv != T::zero() {
                    self.data[base + j] = self.data[base + j] - factor * pv;
                }
            }
            self.data[base + pc] = T::zero();
        }
        self.basis[pr] = pc;
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let threshold = -T::opt_tol();
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.first_art {
            let d = self.obj(j);
            if d < threshold {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, col: usize) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a <= T::pivot_tol() {
                continue;
            }
            let ratio = self.rhs(i).max(T::zero()) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = T::rel_tie(br);
                    if ratio < br - tie
                        || (ratio <= br + tie && self.basis[i] < self.basis[bi])
                    {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best
    }

    fn run(&mut self, limit: usize, pivots: &mut usize) -> Result<PhaseEnd> {
        let stall_limit = 2 * (self.n_struct + self.rows);
        let mut stall = 0usize;
        let mut bland = false;
        loop {
            let Some(col) = self.entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            let Some((row, ratio)) = self.leaving(col) else {
                return Ok(PhaseEnd::Unbounded);
            };
            *pivots += 1;
            if *pivots > limit {
                return Err(Error::NumericalBreakdown { pivots: *pivots });
            }
            if ratio <= T::rel_tie(T::zero()) {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            self.pivot(row, col);
        }
    }

    /// Pivots zero-level artificials out of the basis where a real column
    /// can replace them; rows where none can are linearly redundant.
    fn expel_artificials(&mut self) {
        for i in 0..self.rows {
            if self.basis[i] < self.first_art {
                continue;
            }
            if let Some(j) = (0..self.first_art).find(|&j| self.at(i, j).abs() > T::pivot_tol()) {
                self.pivot(i, j);
            }
        }
    }

    fn primal(&self, lower: &[T], upper: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                y[b] = self.rhs(i);
            }
        }
        y.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&yj, (&l, &u))| (l + yj).max(l).min(u))
            .collect()
    }
}
