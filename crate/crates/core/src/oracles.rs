//! Independent checkers: brute-force optima for tiny instances and a sampled
//! c-cyclical monotonicity certificate for solved grid copulas.

use itertools::Itertools;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::DiscreteCopula;
use crate::dap::{DapInstance, Permutation2D, Sense};
use crate::funcgrid::EnvelopeGrid;

/// Largest `n` accepted by [`brute_force_2ap`].
pub const MAX_PERMUTATION_N: usize = 9;
/// Largest variable count accepted by [`brute_force_dap_vertices`].
pub const MAX_VERTEX_VARIABLES: usize = 12;
/// Default tolerance of the monotonicity certificate.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
    #[error("cost matrix must be square and non-empty")]
    NotSquare,
    #[error("copula has an empty support")]
    EmptySupport,
    #[error("tuple size must be at least 1")]
    TupleSize,
    #[error("copula grid does not match cost grid")]
    GridMismatch,
    #[error("no basic feasible solution found")]
    NoVertex,
}

/// Exact 2-AP optimum by enumerating all `n!` permutations.
///
/// Ties keep the lexicographically smallest permutation.
pub fn brute_force_2ap(costs: &[Vec<f64>], sense: Sense) -> Result<Permutation2D, OracleError> {
    let n = costs.len();
    if n == 0 || costs.iter().any(|r| r.len() != n) {
        return Err(OracleError::NotSquare);
    }
    if n > MAX_PERMUTATION_N {
        return Err(OracleError::TooLarge(format!(
            "n = {n} exceeds {MAX_PERMUTATION_N}"
        )));
    }
    let sign = sense.sign();
    let mut best: Option<(Vec<usize>, f64)> = None;
    // permutations() yields in lexicographic order for a sorted input
    for perm in (0..n).permutations(n) {
        let v: f64 = perm.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
        if best.as_ref().is_none_or(|(_, b)| sign * v < sign * b) {
            best = Some((perm, v));
        }
    }
    let (perm, value) = best.expect("n >= 1");
    Ok(Permutation2D {
        pi: perm.into_iter().map(|j| j + 1).collect(),
        value,
    })
}

type Q = Ratio<i64>;

/// Exact LP optimum of a tiny relaxed d-AP by enumerating every basic
/// feasible solution of the full slice system.
///
/// Column subsets of size `d·n − (d−1)` are solved in rational arithmetic;
/// subsets that are singular, inconsistent or give a negative component are
/// discarded.
pub fn brute_force_dap_vertices(instance: &DapInstance) -> Result<f64, OracleError> {
    let spec = instance.spec();
    let vars = spec.cell_count();
    if vars > MAX_VERTEX_VARIABLES {
        return Err(OracleError::TooLarge(format!(
            "{vars} variables exceed {MAX_VERTEX_VARIABLES}"
        )));
    }
    let (d, n) = (spec.d(), spec.n());
    let rows = d * n;
    let rank = d * n - (d - 1);
    let columns: Vec<Vec<usize>> = (0..vars)
        .map(|flat| {
            let idx = spec.unflat(flat);
            idx.0
                .iter()
                .enumerate()
                .map(|(k, &c)| k * n + c - 1)
                .collect()
        })
        .collect();

    let sign = instance.sense().sign();
    let mut best: Option<f64> = None;
    for subset in (0..vars).combinations(rank) {
        // augmented matrix rows × (rank + 1)
        let mut a = vec![vec![Q::zero(); rank + 1]; rows];
        for (c, &flat) in subset.iter().enumerate() {
            for &r in &columns[flat] {
                a[r][c] = Q::one();
            }
        }
        for row in a.iter_mut() {
            row[rank] = Q::one();
        }
        let Some(x) = solve_exact(a, rank) else {
            continue;
        };
        if x.iter().any(|v| v.is_negative()) {
            continue;
        }
        let value: f64 = subset
            .iter()
            .zip(&x)
            .map(|(&flat, v)| instance.costs()[flat] * (*v.numer() as f64 / *v.denom() as f64))
            .sum::<f64>()
            * instance.rhs();
        if best.is_none_or(|b| sign * value < sign * b) {
            best = Some(value);
        }
    }
    best.ok_or(OracleError::NoVertex)
}

/// Row-reduces an overdetermined augmented system; returns the unique
/// solution if the `cols` columns are independent and the system consistent.
fn solve_exact(mut a: Vec<Vec<Q>>, cols: usize) -> Option<Vec<Q>> {
    let rows = a.len();
    let mut r = 0;
    for c in 0..cols {
        let piv = (r..rows).find(|&i| !a[i][c].is_zero())?;
        a.swap(r, piv);
        let p = a[r][c];
        for v in &mut a[r][c..=cols] {
            *v /= p;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c];
                let (pivot_row, row) = if i < r {
                    let (head, tail) = a.split_at_mut(r);
                    (&tail[0], &mut head[i])
                } else {
                    let (head, tail) = a.split_at_mut(i);
                    (&head[r], &mut tail[0])
                };
                for (x, &y) in row[c..=cols].iter_mut().zip(&pivot_row[c..=cols]) {
                    *x -= f * y;
                }
            }
        }
        r += 1;
    }
    // remaining rows must read 0 = 0
    if a[r..].iter().any(|row| !row[cols].is_zero()) {
        return None;
    }
    Some((0..cols).map(|c| a[c][cols]).collect())
}

/// Outcome of a sampled c-cyclical monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCertificate {
    pub checked_tuples: usize,
    /// Largest improvement found by any sampled rearrangement (0 if none).
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Samples `tuples` random `tuple_size`-tuples of support cells and random
/// permutations of their coordinates on axes 2..d, and records how much the
/// rearranged cells would improve the objective.
///
/// Any improving rearrangement could be mixed into the measure while keeping
/// all slice sums, so an optimal support admits none beyond rounding error.
pub fn check_cyclical_monotonicity(
    c: &DiscreteCopula,
    grid: &EnvelopeGrid,
    sense: Sense,
    tuples: usize,
    tuple_size: usize,
    seed: u64,
) -> Result<MonotonicityCertificate, OracleError> {
    if tuple_size == 0 {
        return Err(OracleError::TupleSize);
    }
    let spec = c.spec();
    if grid.spec() != spec {
        return Err(OracleError::GridMismatch);
    }
    let support = c.support_flat();
    if support.is_empty() {
        return Err(OracleError::EmptySupport);
    }
    let (d, n) = (spec.d(), spec.n());
    let a = grid.coeffs();
    let sign = sense.sign();
    let cells: Vec<Vec<usize>> = support
        .iter()
        .map(|&(flat, _)| {
            let mut coords = vec![0; d];
            spec.write_coords0(flat, &mut coords);
            coords
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![0usize; tuple_size];
    let mut perms: Vec<Vec<usize>> = vec![(0..tuple_size).collect(); d];
    let mut worst = 0.0f64;
    for _ in 0..tuples {
        for p in picked.iter_mut() {
            *p = rng.random_range(0..cells.len());
        }
        for perm in perms.iter_mut().skip(1) {
            perm.shuffle(&mut rng);
        }
        let mut before = 0.0;
        let mut after = 0.0;
        for i in 0..tuple_size {
            before += a[support[picked[i]].0];
            let flat = (0..d).fold(0, |acc, k| acc * n + cells[picked[perms[k][i]]][k]);
            after += a[flat];
        }
        worst = worst.max(sign * (before - after));
    }
    Ok(MonotonicityCertificate {
        checked_tuples: tuples,
        worst_violation: worst,
        tolerance: CERTIFICATE_TOL,
        passed: worst <= CERTIFICATE_TOL,
    })
}
