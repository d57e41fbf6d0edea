//! Uniform grids on the unit cube and the multi-indices that address their cells.
//!
//! A grid with `n` cells per axis in dimension `d` partitions `[0,1]^d` into
//! `n^d` cubes. Cell coordinates are 1-based in every public surface (they
//! match the `i_k ∈ {1,…,n}` convention used in reports and exported files);
//! flat offsets are 0-based mixed-radix with axis 1 slowest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("grid needs at least one cell per axis")]
    NoCells,
    #[error("grid {n}^{d} exceeds the addressable cell count")]
    TooManyCells { d: usize, n: usize },
    #[error("cell index {index:?} does not fit a grid with d={d}, n={n}")]
    IndexOutOfRange {
        index: Vec<usize>,
        d: usize,
        n: usize,
    },
}

/// Dimension and resolution of a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
    cells: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self, GridError> {
        if d < 2 {
            return Err(GridError::DimensionTooSmall(d));
        }
        if n == 0 {
            return Err(GridError::NoCells);
        }
        let cells = u32::try_from(d)
            .ok()
            .and_then(|e| n.checked_pow(e))
            .ok_or(GridError::TooManyCells { d, n })?;
        Ok(GridSpec { d, n, cells })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of cells, `n^d`.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Mixed-radix offset of a cell, axis 1 slowest.
    pub fn flat(&self, index: &CellIndex) -> Result<usize, GridError> {
        self.check(index)?;
        Ok(index.0.iter().fold(0, |acc, &c| acc * self.n + (c - 1)))
    }

    pub fn unflat(&self, flat: usize) -> CellIndex {
        let mut coords = vec![0; self.d];
        self.write_coords0(flat, &mut coords);
        for c in &mut coords {
            *c += 1;
        }
        CellIndex(coords)
    }

    /// Writes the 0-based coordinates of `flat` into `out` (length `d`).
    #[inline]
    pub fn write_coords0(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.d);
        for slot in out.iter_mut().rev() {
            *slot = flat % self.n;
            flat /= self.n;
        }
    }

    /// Corners of the cube `I_i = [(i_1-1)/n, i_1/n) × … × [(i_d-1)/n, i_d/n)`.
    ///
    /// The last cell on each axis is closed at 1 so the cells partition the
    /// closed unit cube.
    pub fn cell_bounds(&self, index: &CellIndex) -> Result<(Vec<f64>, Vec<f64>), GridError> {
        self.check(index)?;
        let n = self.n as f64;
        let lower = index.0.iter().map(|&c| (c - 1) as f64 / n).collect();
        let upper = index.0.iter().map(|&c| c as f64 / n).collect();
        Ok((lower, upper))
    }

    /// The cell containing a point of `[0,1]^d`, 0-based per axis.
    pub fn locate0(&self, x: f64) -> usize {
        let c = (x * self.n as f64).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.n - 1)
        }
    }

    fn check(&self, index: &CellIndex) -> Result<(), GridError> {
        if index.0.len() != self.d || index.0.iter().any(|&c| c == 0 || c > self.n) {
            return Err(GridError::IndexOutOfRange {
                index: index.0.clone(),
                d: self.d,
                n: self.n,
            });
        }
        Ok(())
    }
}

/// A 1-based multi-index `(i_1, …, i_d)` addressing one grid cube.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        CellIndex(coords.into())
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CellIndex {
    fn from(v: Vec<usize>) -> Self {
        CellIndex(v)
    }
}
