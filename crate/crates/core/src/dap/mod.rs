//! The axial d-dimensional assignment problem and its continuous relaxation.
//!
//! For costs `a_i` on the cells of an `n^d` grid the relaxed problem is
//!
//! ```text
//! min / max  Σ_i a_i x_i
//! s.t.       Σ_{i : i_k = l} x_i = rhs     for every axis k and level l
//!            x ≥ 0
//! ```
//!
//! With `rhs = 1/n` a feasible point is exactly a d-fold stochastic cell-mass
//! distribution, so the optimum is the optimal copula integral of the
//! piecewise-constant integrand `a`.

mod hungarian;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcgrid::EnvelopeGrid;
use crate::grid::{CellIndex, GridSpec};

pub use hungarian::{solve_hungarian, Permutation2D};
pub use simplex::{solve_relaxed, solve_relaxed_with, SolverOptions};

/// Slice sums must match the right-hand side to this absolute tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[serde(alias = "min")]
    Minimize,
    #[serde(alias = "max")]
    Maximize,
}

impl Sense {
    /// `+1` for minimize, `-1` for maximize.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        }
    }
}

impl std::str::FromStr for Sense {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" | "minimize" => Ok(Sense::Minimize),
            "max" | "maximize" => Ok(Sense::Maximize),
            other => Err(format!("unknown sense `{other}` (expected min or max)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DapError {
    #[error("right-hand side must be positive and finite, got {0}")]
    Rhs(f64),
    #[error("cost tensor has {got} entries, expected {expected}")]
    CostLength { expected: usize, got: usize },
    #[error("cost {index} is not finite")]
    NonFiniteCost { index: usize },
    #[error("cost matrix must be square and non-empty")]
    NotSquare,
    #[error("solver stopped with status {0}")]
    NotOptimal(SolveStatus),
    #[error("operation needs d = 2, instance has d = {0}")]
    NotTwoDimensional(usize),
}

/// A relaxed axial assignment problem over the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DapInstance {
    spec: GridSpec,
    sense: Sense,
    costs: Vec<f64>,
    rhs: f64,
}

impl DapInstance {
    /// Builds an instance from a flat cost tensor in mixed-radix order.
    pub fn new(spec: GridSpec, sense: Sense, costs: Vec<f64>, rhs: f64) -> Result<Self, DapError> {
        if !(rhs > 0.0 && rhs.is_finite()) {
            return Err(DapError::Rhs(rhs));
        }
        if costs.len() != spec.cell_count() {
            return Err(DapError::CostLength {
                expected: spec.cell_count(),
                got: costs.len(),
            });
        }
        if let Some(index) = costs.iter().position(|a| !a.is_finite()) {
            return Err(DapError::NonFiniteCost { index });
        }
        Ok(DapInstance {
            spec,
            sense,
            costs,
            rhs,
        })
    }

    /// Two-dimensional instance from a square matrix, `costs[i][j] = a_{(i+1)(j+1)}`.
    pub fn from_matrix(costs: &[Vec<f64>], sense: Sense, rhs: f64) -> Result<Self, DapError> {
        let n = costs.len();
        if n == 0 || costs.iter().any(|r| r.len() != n) {
            return Err(DapError::NotSquare);
        }
        let spec = GridSpec::new(2, n).expect("2 x n grid always fits");
        Self::new(spec, sense, costs.concat(), rhs)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    /// One constraint per (axis, level) slice.
    pub fn constraint_count(&self) -> usize {
        self.spec.d() * self.spec.n()
    }

    pub fn variable_count(&self) -> usize {
        self.spec.cell_count()
    }

    /// Rank of the slice-constraint system, `d·n − (d − 1)`.
    pub fn rank(&self) -> usize {
        let (d, n) = (self.spec.d(), self.spec.n());
        d * n - (d - 1)
    }

    /// The same problem with a different right-hand side.
    pub fn with_rhs(&self, rhs: f64) -> Result<Self, DapError> {
        Self::new(self.spec, self.sense, self.costs.clone(), rhs)
    }
}

/// Builds the relaxed d-AP whose objective is the envelope's coefficients.
pub fn build_dap(grid: &EnvelopeGrid, sense: Sense, rhs: f64) -> Result<DapInstance, DapError> {
    DapInstance::new(grid.spec(), sense, grid.coeffs().to_vec(), rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// No leaving row in a ratio test. The relaxation is bounded, so this
    /// indicates a numerical failure.
    UnboundedImpossible,
    /// The starting basis was not feasible. Cannot happen for a well-formed instance.
    InfeasibleImpossible,
    IterationLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::UnboundedImpossible => "unbounded_impossible",
            SolveStatus::InfeasibleImpossible => "infeasible_impossible",
            SolveStatus::IterationLimit => "iteration_limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub index: CellIndex,
    pub mass: f64,
}

/// Result of [`solve_relaxed`].
#[derive(Debug, Clone, PartialEq)]
pub struct DapSolution {
    pub(crate) spec: GridSpec,
    pub(crate) sense: Sense,
    pub(crate) rhs: f64,
    pub(crate) value: f64,
    /// Sorted by flat offset; only strictly positive masses.
    pub(crate) support: Vec<(usize, f64)>,
    pub(crate) iterations: usize,
    pub(crate) status: SolveStatus,
    /// Dual value per (axis, level), axis-major; in units of the original costs.
    pub(crate) duals: Vec<f64>,
}

impl DapSolution {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn status(&self) -> SolveStatus {
        self.status
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Errors unless the solver proved optimality.
    pub fn into_optimal(self) -> Result<Self, DapError> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(DapError::NotOptimal(self.status))
        }
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// `(flat offset, mass)` pairs with positive mass.
    pub fn support_flat(&self) -> &[(usize, f64)] {
        &self.support
    }

    pub fn support(&self) -> Vec<SupportEntry> {
        self.support
            .iter()
            .map(|&(flat, mass)| SupportEntry {
                index: self.spec.unflat(flat),
                mass,
            })
            .collect()
    }

    /// Dual value of the slice constraint for `axis` (0-based) and `level` (1-based).
    pub fn dual(&self, axis: usize, level: usize) -> f64 {
        self.duals[axis * self.spec.n() + level - 1]
    }

    pub fn duals(&self) -> &[f64] {
        &self.duals
    }

    /// Sum of masses on every (axis, level) slice, axis-major.
    pub fn slice_sums(&self) -> Vec<f64> {
        slice_sums(self.spec, &self.support)
    }

    /// Largest `|slice sum − rhs|`.
    pub fn max_feasibility_violation(&self) -> f64 {
        self.slice_sums()
            .iter()
            .fold(0.0, |m, s| m.max((s - self.rhs).abs()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "value": self.value,
            "status": self.status,
            "iterations": self.iterations,
            "support": self.support(),
        })
    }

    /// Duals as `[{axis, level, value}]` with 1-based axis and level.
    pub fn duals_json(&self) -> serde_json::Value {
        let n = self.spec.n();
        let rows: Vec<_> = self
            .duals
            .iter()
            .enumerate()
            .map(|(r, y)| serde_json::json!({"axis": r / n + 1, "level": r % n + 1, "value": y}))
            .collect();
        serde_json::Value::Array(rows)
    }
}

pub(crate) fn slice_sums(spec: GridSpec, support: &[(usize, f64)]) -> Vec<f64> {
    let (d, n) = (spec.d(), spec.n());
    let mut sums = vec![0.0; d * n];
    let mut coords = vec![0; d];
    for &(flat, mass) in support {
        spec.write_coords0(flat, &mut coords);
        for (k, &c) in coords.iter().enumerate() {
            sums[k * n + c] += mass;
        }
    }
    sums
}

/// Reduced-cost and complementary-slackness check of a reported optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Most negative sense-adjusted reduced cost over all cells (≥ −tol when optimal).
    pub min_reduced_cost: f64,
    /// Largest `|reduced cost|` over support cells.
    pub slackness_violation: f64,
    /// `|primal value − dual objective|`.
    pub duality_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Verifies the dual solution attached to `sol` against the instance costs.
///
/// `tolerance` is absolute, relative to costs scaled to `max|a| ≤ 1`.
pub fn certify(instance: &DapInstance, sol: &DapSolution, tolerance: f64) -> DualCertificate {
    let spec = instance.spec;
    let (d, n) = (spec.d(), spec.n());
    let sign = instance.sense.sign();
    let scale = instance
        .costs
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()))
        .max(1.0);
    let mut coords = vec![0; d];
    let reduced = |flat: usize, coords: &mut [usize]| {
        spec.write_coords0(flat, coords);
        let y: f64 = coords
            .iter()
            .enumerate()
            .map(|(k, &c)| sol.duals[k * n + c])
            .sum();
        sign * (instance.costs[flat] - y) / scale
    };
    let mut min_rc = f64::INFINITY;
    for flat in 0..spec.cell_count() {
        min_rc = min_rc.min(reduced(flat, &mut coords));
    }
    let slackness = sol
        .support
        .iter()
        .map(|&(flat, _)| reduced(flat, &mut coords).abs())
        .fold(0.0, f64::max);
    let dual_obj: f64 = instance.rhs * sol.duals.iter().sum::<f64>();
    let duality_gap = (sol.value - dual_obj).abs() / scale;
    let passed = min_rc >= -tolerance && slackness <= tolerance && duality_gap <= tolerance;
    DualCertificate {
        min_reduced_cost: min_rc,
        slackness_violation: slackness,
        duality_gap,
        tolerance,
        passed,
    }
}
