//! Revised primal simplex specialised to the slice-constraint structure.
//!
//! Columns are never materialised: the column of cell `i` has a one in the
//! row of each `(axis k, level i_k)` slice. The `d·n` slice rows have rank
//! `d·n − (d − 1)`; the last level of every axis except the first is dropped
//! to get a full-rank working system, and the dropped rows hold automatically
//! because every axis' slices sum to the same total.
//!
//! The internal problem is always a minimisation with `rhs = 1` and costs
//! scaled to `max|c| ≤ 1`; sense, scale and right-hand side are restored when
//! the solution is extracted.

use super::{DapInstance, DapSolution, SolveStatus};
use crate::dap::DapError;
use crate::grid::GridSpec;

/// Knobs for [`solve_relaxed_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Pivot budget. `None` uses `max(50·d·n·ln(n^d), 1000)`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_streak: usize,
    /// Pivots between refactorisations of the basis inverse.
    pub refactor_interval: usize,
    /// Optimality tolerance on scaled reduced costs.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: None,
            degenerate_streak: 50,
            refactor_interval: 100,
            tolerance: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn budget(&self, spec: GridSpec) -> usize {
        self.max_iterations.unwrap_or_else(|| default_budget(spec))
    }
}

fn default_budget(spec: GridSpec) -> usize {
    let (d, n) = (spec.d() as f64, spec.n() as f64);
    let b = 50.0 * d * n * (d * n.ln());
    (b.ceil() as usize).max(1000)
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;
const ZERO_MASS: f64 = 1e-12;

/// Solves the relaxed d-AP with default options.
pub fn solve_relaxed(instance: &DapInstance) -> Result<DapSolution, DapError> {
    solve_relaxed_with(instance, &SolverOptions::default())
}

/// Solves the relaxed d-AP.
///
/// The returned solution carries a status; anything other than
/// [`SolveStatus::Optimal`] must not be trusted as an optimum.
pub fn solve_relaxed_with(
    instance: &DapInstance,
    options: &SolverOptions,
) -> Result<DapSolution, DapError> {
    let mut work = Work::new(instance);
    let budget = options.budget(instance.spec);
    let status = work.run(options, budget);
    Ok(work.extract(instance, status))
}

struct Work {
    spec: GridSpec,
    d: usize,
    n: usize,
    m: usize,
    scale: f64,
    /// Sense-adjusted, scaled costs.
    costs: Vec<f64>,
    /// Flat index of the basic variable at each basis position.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Dense row-major `B^{-1}`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    /// Dual per working row.
    y: Vec<f64>,
    /// Dual per (axis, level), zero on dropped rows.
    axis_duals: Vec<f64>,
    iterations: usize,
    coords: Vec<usize>,
    rows: Vec<usize>,
    w: Vec<f64>,
}

impl Work {
    fn new(instance: &DapInstance) -> Self {
        let spec = instance.spec;
        let (d, n) = (spec.d(), spec.n());
        let m = n + (d - 1) * (n - 1);
        let scale = instance
            .costs
            .iter()
            .fold(0.0f64, |acc, a| acc.max(a.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let sign = instance.sense.sign();
        let costs = instance.costs.iter().map(|a| sign * a / scale).collect();
        let mut work = Work {
            spec,
            d,
            n,
            m,
            scale,
            costs,
            basis: Vec::with_capacity(m),
            is_basic: vec![false; spec.cell_count()],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            y: vec![0.0; m],
            axis_duals: vec![0.0; d * n],
            iterations: 0,
            coords: vec![0; d],
            rows: Vec::with_capacity(d),
            w: vec![0.0; m],
        };
        work.staircase_basis();
        work
    }

    /// Working row of slice `(axis, level)`, both 0-based.
    #[inline]
    fn row_of(&self, axis: usize, level: usize) -> Option<usize> {
        if axis == 0 {
            Some(level)
        } else if level == self.n - 1 {
            None
        } else {
            Some(self.n + (axis - 1) * (self.n - 1) + level)
        }
    }

    fn column_rows(&mut self, flat: usize) {
        self.spec.write_coords0(flat, &mut self.coords);
        self.rows.clear();
        for k in 0..self.d {
            if let Some(r) = self.row_of(k, self.coords[k]) {
                self.rows.push(r);
            }
        }
    }

    /// Greedy feasible start: walk the cells in lexicographic order, moving
    /// one axis forward per step once its current slice is filled.
    ///
    /// Consecutive cells differ in exactly one coordinate, which makes the
    /// resulting `d·(n−1)+1` columns linearly independent.
    fn staircase_basis(&mut self) {
        let (d, n) = (self.d, self.n);
        let mut pos = vec![0usize; d];
        let mut remaining = vec![1.0f64; d];
        let mut values = Vec::with_capacity(self.m);
        loop {
            let amount = remaining.iter().copied().fold(f64::INFINITY, f64::min);
            let flat = pos.iter().fold(0, |acc, &c| acc * n + c);
            self.basis.push(flat);
            self.is_basic[flat] = true;
            values.push(amount);
            for r in &mut remaining {
                *r -= amount;
            }
            let Some(k) = (0..d).find(|&k| remaining[k] <= 0.0 && pos[k] + 1 < n) else {
                break;
            };
            pos[k] += 1;
            remaining[k] = 1.0;
        }
        debug_assert_eq!(self.basis.len(), self.m);
        self.xb = values;
    }

    /// Recomputes `B^{-1}` from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0f64; m * m];
        for pos in 0..m {
            self.column_rows(self.basis[pos]);
            for &r in &self.rows {
                a[r * m + pos] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, best) = (col..m)
                .map(|r| (r, a[r * m + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < 1e-12 {
                return false;
            }
            if piv != col {
                for j in 0..m {
                    a.swap(piv * m + j, col * m + j);
                    inv.swap(piv * m + j, col * m + j);
                }
            }
            let p = a[col * m + col];
            for j in 0..m {
                a[col * m + j] /= p;
                inv[col * m + j] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        a[r * m + j] -= f * a[col * m + j];
                        inv[r * m + j] -= f * inv[col * m + j];
                    }
                }
            }
        }
        // `a` is now the identity and `inv` maps rows to basis positions.
        self.binv = inv;
        // x_B = B^{-1} 1
        for i in 0..m {
            self.xb[i] = self.binv[i * m..(i + 1) * m].iter().sum();
        }
        true
    }

    fn update_duals(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let c = self.costs[self.basis[i]];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yr, b) in self.y.iter_mut().zip(row) {
                    *yr += c * b;
                }
            }
        }
        for k in 0..self.d {
            for l in 0..self.n {
                self.axis_duals[k * self.n + l] = self.row_of(k, l).map_or(0.0, |r| self.y[r]);
            }
        }
    }

    /// Returns the entering column, if any reduced cost is below `-tol`.
    fn price(&mut self, tol: f64, bland: bool) -> Option<usize> {
        let (d, n) = (self.d, self.n);
        let outer_count = self.spec.cell_count() / n;
        let last = &self.axis_duals[(d - 1) * n..];
        let mut outer = vec![0usize; d - 1];
        let mut best: Option<(usize, f64)> = None;
        for o in 0..outer_count {
            // odometer over axes 0..d-1
            let mut rest = o;
            for k in (0..d - 1).rev() {
                outer[k] = rest % n;
                rest /= n;
            }
            let base: f64 = outer
                .iter()
                .enumerate()
                .map(|(k, &c)| self.axis_duals[k * n + c])
                .sum();
            let start = o * n;
            let costs = &self.costs[start..start + n];
            for l in 0..n {
                let rc = costs[l] - base - last[l];
                if rc < -tol && !self.is_basic[start + l] {
                    if bland {
                        return Some(start + l);
                    }
                    if best.is_none_or(|(_, b)| rc < b) {
                        best = Some((start + l, rc));
                    }
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self, options: &SolverOptions, budget: usize) -> SolveStatus {
        if !self.refactor() {
            return SolveStatus::InfeasibleImpossible;
        }
        if self.xb.iter().any(|&v| v < -PIVOT_TOL) {
            return SolveStatus::InfeasibleImpossible;
        }
        self.update_duals();
        let mut streak = 0usize;
        let mut since_refactor = 0usize;
        loop {
            let bland = streak >= options.degenerate_streak;
            let entering = match self.price(options.tolerance, bland) {
                Some(j) => j,
                None => {
                    // confirm on a fresh factorisation before declaring optimality
                    if since_refactor > 0 {
                        if !self.refactor() {
                            return SolveStatus::InfeasibleImpossible;
                        }
                        since_refactor = 0;
                        self.update_duals();
                        continue;
                    }
                    return SolveStatus::Optimal;
                }
            };
            if self.iterations >= budget {
                return SolveStatus::IterationLimit;
            }
            let Some((leave, theta)) = self.ratio_test(entering) else {
                return SolveStatus::UnboundedImpossible;
            };
            self.pivot(entering, leave, theta);
            self.iterations += 1;
            since_refactor += 1;
            if theta <= DEGENERATE_STEP {
                streak += 1;
            } else {
                streak = 0;
            }
            if since_refactor >= options.refactor_interval {
                if !self.refactor() {
                    return SolveStatus::InfeasibleImpossible;
                }
                since_refactor = 0;
            }
            self.update_duals();
        }
    }

    /// Computes `w = B^{-1} a_j` and picks the leaving position.
    fn ratio_test(&mut self, entering: usize) -> Option<(usize, f64)> {
        let m = self.m;
        self.column_rows(entering);
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.w[i] = self.rows.iter().map(|&r| row[r]).sum();
        }
        let mut theta = f64::INFINITY;
        for i in 0..m {
            if self.w[i] > PIVOT_TOL {
                theta = theta.min(self.xb[i].max(0.0) / self.w[i]);
            }
        }
        if !theta.is_finite() {
            return None;
        }
        // smallest variable index among tied rows
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if self.w[i] > PIVOT_TOL
                && self.xb[i].max(0.0) / self.w[i] <= theta + RATIO_TIE
                && leave.is_none_or(|l| self.basis[i] < self.basis[l])
            {
                leave = Some(i);
            }
        }
        leave.map(|l| (l, theta))
    }

    fn pivot(&mut self, entering: usize, leave: usize, theta: f64) {
        let m = self.m;
        for i in 0..m {
            if i != leave {
                self.xb[i] -= theta * self.w[i];
            }
        }
        self.xb[leave] = theta;

        let p = self.w[leave];
        let (head, tail) = self.binv.split_at_mut(leave * m);
        let (pivot_row, tail) = tail.split_at_mut(m);
        pivot_row.iter_mut().for_each(|v| *v /= p);
        for (i, row) in head.chunks_exact_mut(m).enumerate() {
            axpy(row, -self.w[i], pivot_row);
        }
        for (i, row) in tail.chunks_exact_mut(m).enumerate() {
            axpy(row, -self.w[leave + 1 + i], pivot_row);
        }

        self.is_basic[self.basis[leave]] = false;
        self.is_basic[entering] = true;
        self.basis[leave] = entering;
    }

    fn extract(&mut self, instance: &DapInstance, status: SolveStatus) -> DapSolution {
        let rhs = instance.rhs;
        let mut support: Vec<(usize, f64)> = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|&(_, &v)| v > ZERO_MASS)
            .map(|(&flat, &v)| (flat, v * rhs))
            .collect();
        support.sort_unstable_by_key(|&(flat, _)| flat);
        let value = support
            .iter()
            .map(|&(flat, mass)| instance.costs[flat] * mass)
            .sum();
        let factor = instance.sense.sign() * self.scale;
        let duals = self.axis_duals.iter().map(|y| factor * y).collect();
        DapSolution {
            spec: self.spec,
            sense: instance.sense,
            rhs,
            value,
            support,
            iterations: self.iterations,
            status,
            duals,
        }
    }
}

#[inline]
fn axpy(row: &mut [f64], f: f64, pivot_row: &[f64]) {
    if f != 0.0 {
        for (a, b) in row.iter_mut().zip(pivot_row) {
            *a += f * b;
        }
    }
}
