//! Grid copulas: d-fold stochastic measures that are uniform inside each cell.
//!
//! A [`DiscreteCopula`] places mass `x_i` on cube `I_i` and spreads it
//! uniformly there. When every axis slice carries mass `1/n` the measure has
//! uniform one-dimensional margins, so its distribution function is a copula.
//! That distribution function is piecewise multilinear and is evaluated by
//! interpolating a cumulative mass tensor.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dap::{slice_sums, DapSolution, Permutation2D, SupportEntry};
use crate::funcgrid::EnvelopeGrid;
use crate::grid::{CellIndex, GridError, GridSpec};

/// Tolerance on total mass and slice sums.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error("slice {level} on axis {axis} carries mass {sum}, expected {expected}")]
    Stochasticity {
        axis: usize,
        level: usize,
        sum: f64,
        expected: f64,
    },
    #[error("cell {index:?} has negative or non-finite mass {mass}")]
    InvalidMass { index: CellIndex, mass: f64 },
    #[error("point {0:?} lies outside the unit cube")]
    PointOutside(Vec<f64>),
    #[error("box is malformed: {0}")]
    MalformedBox(String),
    #[error("grid {got:?} does not match the copula grid {expected:?}")]
    GridMismatch { expected: GridSpec, got: GridSpec },
    #[error("solution is not integral: cell {index:?} has mass {mass}")]
    NotIntegral { index: CellIndex, mass: f64 },
    #[error("shuffles of M exist only for d = 2, got d = {0}")]
    NotTwoDimensional(usize),
    #[error("copula has no mass")]
    EmptySupport,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A d-fold stochastic measure with uniform mass inside each grid cell.
#[derive(Debug)]
pub struct DiscreteCopula {
    spec: GridSpec,
    /// `(flat, mass)` sorted by flat offset, masses > 0.
    mass: Vec<(usize, f64)>,
    cumulative: OnceLock<Vec<f64>>,
}

impl Clone for DiscreteCopula {
    fn clone(&self) -> Self {
        DiscreteCopula {
            spec: self.spec,
            mass: self.mass.clone(),
            cumulative: OnceLock::new(),
        }
    }
}

impl PartialEq for DiscreteCopula {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.mass == other.mass
    }
}

impl DiscreteCopula {
    /// Builds the optimal copula from an LP solution.
    ///
    /// Masses are rescaled from the solution's right-hand side to `1/n`, so a
    /// solution of the canonical problem (`rhs = 1`) is divided by `n`.
    pub fn from_solution(sol: &DapSolution) -> Result<Self, CopulaError> {
        let spec = sol.spec();
        let factor = 1.0 / (spec.n() as f64 * sol.rhs());
        let mass = sol
            .support_flat()
            .iter()
            .map(|&(flat, m)| (flat, m * factor))
            .collect();
        Self::from_flat(spec, mass)
    }

    /// Builds a copula from explicit cell masses, validating stochasticity.
    pub fn from_support(spec: GridSpec, support: &[SupportEntry]) -> Result<Self, CopulaError> {
        let mut mass = Vec::with_capacity(support.len());
        for e in support {
            mass.push((spec.flat(&e.index)?, e.mass));
        }
        Self::from_flat(spec, mass)
    }

    fn from_flat(spec: GridSpec, mut mass: Vec<(usize, f64)>) -> Result<Self, CopulaError> {
        mass.sort_unstable_by_key(|&(flat, _)| flat);
        // merge duplicates and drop zero cells
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(mass.len());
        for (flat, m) in mass {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(CopulaError::InvalidMass {
                    index: spec.unflat(flat),
                    mass: m,
                });
            }
            match merged.last_mut() {
                Some(last) if last.0 == flat => last.1 += m,
                _ => merged.push((flat, m)),
            }
        }
        merged.retain(|&(_, m)| m > 0.0);
        if merged.is_empty() {
            return Err(CopulaError::EmptySupport);
        }
        let n = spec.n();
        let expected = 1.0 / n as f64;
        for (r, &sum) in slice_sums(spec, &merged).iter().enumerate() {
            if (sum - expected).abs() > STOCHASTIC_TOL {
                return Err(CopulaError::Stochasticity {
                    axis: r / n + 1,
                    level: r % n + 1,
                    sum,
                    expected,
                });
            }
        }
        Ok(DiscreteCopula {
            spec,
            mass: merged,
            cumulative: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    pub fn support_flat(&self) -> &[(usize, f64)] {
        &self.mass
    }

    pub fn support(&self) -> Vec<SupportEntry> {
        self.mass
            .iter()
            .map(|&(flat, mass)| SupportEntry {
                index: self.spec.unflat(flat),
                mass,
            })
            .collect()
    }

    /// Mass of a single cell.
    pub fn cell_mass(&self, index: &CellIndex) -> Result<f64, CopulaError> {
        let flat = self.spec.flat(index)?;
        Ok(self
            .mass
            .binary_search_by_key(&flat, |&(f, _)| f)
            .map_or(0.0, |p| self.mass[p].1))
    }

    /// Mass on every (axis, level) slice, axis-major.
    pub fn slice_sums(&self) -> Vec<f64> {
        slice_sums(self.spec, &self.mass)
    }

    /// Cumulative masses on the `(n+1)^d` grid nodes:
    /// `S[j] = Σ mass[i]` over cells with `i_k < j_k` (0-based) on every axis.
    fn cumulative(&self) -> &[f64] {
        self.cumulative.get_or_init(|| {
            let (d, n) = (self.spec.d(), self.spec.n());
            let side = n + 1;
            let len = side.pow(d as u32);
            let mut s = vec![0.0; len];
            let mut coords = vec![0; d];
            for &(flat, m) in &self.mass {
                self.spec.write_coords0(flat, &mut coords);
                let node = coords.iter().fold(0, |acc, &c| acc * side + c + 1);
                s[node] += m;
            }
            // prefix sums along each axis
            let mut stride = 1;
            for _ in 0..d {
                for idx in 0..len {
                    if (idx / stride) % side != 0 {
                        s[idx] += s[idx - stride];
                    }
                }
                stride *= side;
            }
            s
        })
    }

    /// `C(x) = μ([0,x_1] × … × [0,x_d])`.
    pub fn cdf(&self, x: &[f64]) -> Result<f64, CopulaError> {
        let d = self.spec.d();
        if x.len() != d || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CopulaError::PointOutside(x.to_vec()));
        }
        let n = self.spec.n();
        let side = n + 1;
        let s = self.cumulative();
        let mut cell = vec![0usize; d];
        let mut t = vec![0.0; d];
        for k in 0..d {
            cell[k] = self.spec.locate0(x[k]);
            t[k] = (n as f64 * x[k] - cell[k] as f64).clamp(0.0, 1.0);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut node = 0;
            for k in 0..d {
                let up = (corner >> (d - 1 - k)) & 1;
                weight *= if up == 1 { t[k] } else { 1.0 - t[k] };
                node = node * side + cell[k] + up;
            }
            if weight != 0.0 {
                total += weight * s[node];
            }
        }
        Ok(total)
    }

    /// `V_C([a,b]) = Σ_{v ∈ vertices} sgn(v) C(v)`.
    pub fn c_volume(&self, lower: &[f64], upper: &[f64]) -> Result<f64, CopulaError> {
        let d = self.spec.d();
        if lower.len() != d || upper.len() != d {
            return Err(CopulaError::MalformedBox(format!(
                "corners must have {d} coordinates"
            )));
        }
        for k in 0..d {
            let (a, b) = (lower[k], upper[k]);
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(CopulaError::MalformedBox(format!(
                    "axis {} interval [{a}, {b}] leaves [0,1]",
                    k + 1
                )));
            }
            if a > b {
                return Err(CopulaError::MalformedBox(format!(
                    "axis {} has lower corner {a} above upper corner {b}",
                    k + 1
                )));
            }
        }
        let mut vertex = vec![0.0; d];
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut lows = 0;
            for k in 0..d {
                if (corner >> k) & 1 == 1 {
                    vertex[k] = upper[k];
                } else {
                    vertex[k] = lower[k];
                    lows += 1;
                }
            }
            let c = self.cdf(&vertex)?;
            if lows % 2 == 0 {
                total += c;
            } else {
                total -= c;
            }
        }
        Ok(total)
    }

    /// `Σ_i a_i · mass_i`, the integral of the piecewise-constant `grid` function.
    pub fn integrate_cellwise(&self, grid: &EnvelopeGrid) -> Result<f64, CopulaError> {
        if grid.spec() != self.spec {
            return Err(CopulaError::GridMismatch {
                expected: self.spec,
                got: grid.spec(),
            });
        }
        let a = grid.coeffs();
        Ok(self.mass.iter().map(|&(flat, m)| a[flat] * m).sum())
    }

    /// Draws `count` points: a cell with probability equal to its mass, then
    /// a uniform point in that cell.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        if count == 0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = WeightedIndex::new(self.mass.iter().map(|&(_, m)| m))
            .expect("validated masses are positive");
        let (d, n) = (self.spec.d(), self.spec.n() as f64);
        let mut coords = vec![0; d];
        (0..count)
            .map(|_| {
                let (flat, _) = self.mass[dist.sample(&mut rng)];
                self.spec.write_coords0(flat, &mut coords);
                coords
                    .iter()
                    .map(|&c| ((c as f64 + rng.random::<f64>()) / n).min(1.0))
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.spec.d(),
            "n": self.spec.n(),
            "support": self.support(),
        })
    }

    /// CDF on the regular lattice `{0, 1/(p−1), …, 1}^d`, one row per node.
    pub fn cdf_grid_csv(&self, points_per_axis: usize) -> String {
        let d = self.spec.d();
        let p = points_per_axis.max(2);
        let mut out = String::new();
        for k in 1..=d {
            let _ = write!(out, "x{k},");
        }
        out.push_str("cdf\n");
        let mut x = vec![0.0; d];
        for node in 0..p.pow(d as u32) {
            let mut rest = node;
            for k in (0..d).rev() {
                x[k] = (rest % p) as f64 / (p - 1) as f64;
                rest /= p;
            }
            let c = self.cdf(&x).expect("lattice lies in the unit cube");
            for v in &x {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{c:?}");
        }
        out
    }
}

/// Sample points as CSV with a `x1,…,xd` header.
pub fn points_to_csv(d: usize, points: &[Vec<f64>]) -> String {
    let mut out = (1..=d)
        .map(|k| format!("x{k}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// A two-dimensional Shuffle of M on the equidistant partition `s_i = i/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleOfM {
    pub n: usize,
    pub pi: Permutation2D,
    /// Orientation per strip, `+1` along the diagonal and `-1` along the antidiagonal.
    pub omega: Vec<i8>,
}

impl ShuffleOfM {
    /// Cell masses induced by the shuffle: `1/n` on each `(i, π(i))`.
    pub fn cell_masses(&self) -> Vec<SupportEntry> {
        let m = 1.0 / self.n as f64;
        self.pi
            .pi
            .iter()
            .enumerate()
            .map(|(i, &j)| SupportEntry {
                index: CellIndex::new([i + 1, j]),
                mass: m,
            })
            .collect()
    }

    /// Distribution function of the shuffle with mass on the segments in each square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let h = 1.0 / self.n as f64;
        self.pi
            .pi
            .iter()
            .zip(&self.omega)
            .enumerate()
            .map(|(i, (&j, &w))| {
                let x0 = i as f64 * h;
                let y0 = (j - 1) as f64 * h;
                let du = (u - x0).clamp(0.0, h);
                let dv = (v - y0).clamp(0.0, h);
                if w >= 0 {
                    // segment (x0 + t, y0 + t)
                    du.min(dv)
                } else {
                    // segment (x0 + t, y0 + h - t): needs t ≤ du and t ≥ h - dv
                    (du - (h - dv)).max(0.0)
                }
            })
            .sum()
    }
}

/// Reads the optimal permutation off an integral two-dimensional solution.
pub fn to_shuffle_of_m(sol: &DapSolution) -> Result<ShuffleOfM, CopulaError> {
    let spec = sol.spec();
    if spec.d() != 2 {
        return Err(CopulaError::NotTwoDimensional(spec.d()));
    }
    let n = spec.n();
    let rhs = sol.rhs();
    let mut pi = vec![0usize; n];
    let mut coords = [0usize; 2];
    for &(flat, mass) in sol.support_flat() {
        spec.write_coords0(flat, &mut coords);
        let ratio = mass / rhs;
        if (ratio - 1.0).abs() > STOCHASTIC_TOL || pi[coords[0]] != 0 {
            return Err(CopulaError::NotIntegral {
                index: spec.unflat(flat),
                mass,
            });
        }
        pi[coords[0]] = coords[1] + 1;
    }
    if let Some(row) = pi.iter().position(|&j| j == 0) {
        return Err(CopulaError::NotIntegral {
            index: CellIndex::new([row + 1, 1]),
            mass: 0.0,
        });
    }
    let perm = Permutation2D {
        pi,
        value: sol.value() / rhs,
    };
    if !perm.is_bijection() {
        return Err(CopulaError::Stochasticity {
            axis: 2,
            level: 0,
            sum: f64::NAN,
            expected: rhs,
        });
    }
    Ok(ShuffleOfM {
        n,
        pi: perm,
        omega: vec![1; n],
    })
}
