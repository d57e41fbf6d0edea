//! Best-possible bounds on `∫ f dC` over all d-dimensional copulas `C`.
//!
//! The integrand is replaced on a uniform `n^d` grid by its cell-wise minimum
//! and maximum. For a piecewise-constant integrand the optimal copula is
//! found by a linear program: the continuous relaxation of the axial
//! d-dimensional assignment problem with slice sums `1/n`. Solving it for
//! both envelopes encloses the optimum for `f`, and the enclosure shrinks as
//! the grid is refined.
//!
//! ```
//! use copula_bounds::{bound, parse_integrand, GridSpec, Sense};
//!
//! let f = parse_integrand("x1*x2", 2).unwrap();
//! let r = bound(&f, GridSpec::new(2, 10).unwrap(), Sense::Minimize, 2).unwrap();
//! assert!(r.lower_value <= 1.0 / 6.0 && 1.0 / 6.0 <= r.upper_value);
//! ```

pub mod copula;
pub mod dap;
pub mod expr;
pub mod funcgrid;
pub mod grid;
pub mod measures;
pub mod oracles;

use thiserror::Error;

pub use copula::{points_to_csv, to_shuffle_of_m, CopulaError, DiscreteCopula, ShuffleOfM};
pub use dap::{
    build_dap, certify, solve_hungarian, solve_relaxed, solve_relaxed_with, DapError, DapInstance,
    DapSolution, DualCertificate, Permutation2D, Sense, SolveStatus, SolverOptions, SupportEntry,
};
pub use expr::{parse_integrand, EvalError, ExprError, Integrand, MonotonicityHint};
pub use funcgrid::{build_envelope, EnvelopeError, EnvelopeGrid, EnvelopeKind};
pub use grid::{CellIndex, GridError, GridSpec};
pub use measures::{
    bound, bound_detailed, convergence_sweep, independence_integrand, rho_bounds, rho_bounds_with,
    rho_from_integral, sweep_csv, BoundOptions, BoundReport, BoundRun, RhoSpec, Side, SweepEntry,
};
pub use oracles::{
    brute_force_2ap, brute_force_dap_vertices, check_cyclical_monotonicity,
    MonotonicityCertificate, OracleError,
};

/// Any failure of the bound pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Dap(#[from] DapError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Dap(DapError::NotOptimal(_)) | Error::Copula(_))
    }
}
