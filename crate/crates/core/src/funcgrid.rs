//! Cell-wise envelopes of an integrand on the uniform `n^d` grid.
//!
//! The lower (upper) envelope replaces `f` on every cube by its minimum
//! (maximum) there. Extrema are taken over an `m^d` lattice per cell that
//! always includes the `2^d` corners, so they are exact for integrands that are
//! monotone in each coordinate and otherwise an inner approximation of the
//! true cell range.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Integrand};
use crate::grid::{CellIndex, GridError, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("sample density must be at least 2, got {0}")]
    SampleDensity(usize),
    #[error("integrand has {integrand} variables but the grid has dimension {grid}")]
    DimensionMismatch { integrand: usize, grid: usize },
    #[error("evaluation failed in cell {cell:?}: {source}")]
    Eval {
        cell: CellIndex,
        #[source]
        source: EvalError,
    },
    #[error("coefficient tensor has {got} entries, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The coefficient tensor `a_i` of a piecewise-constant envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeGrid {
    spec: GridSpec,
    kind: EnvelopeKind,
    coeffs: Vec<f64>,
    sample_density: usize,
}

impl EnvelopeGrid {
    /// Wraps a precomputed coefficient tensor in mixed-radix order.
    pub fn from_coeffs(
        spec: GridSpec,
        kind: EnvelopeKind,
        coeffs: Vec<f64>,
        sample_density: usize,
    ) -> Result<Self, EnvelopeError> {
        if coeffs.len() != spec.cell_count() {
            return Err(EnvelopeError::Length {
                expected: spec.cell_count(),
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|a| !a.is_finite()) {
            return Err(EnvelopeError::NonFinite { index });
        }
        Ok(EnvelopeGrid {
            spec,
            kind,
            coeffs,
            sample_density,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    pub fn sample_density(&self) -> usize {
        self.sample_density
    }

    /// Flat coefficients, axis 1 slowest.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, index: &CellIndex) -> Result<f64, GridError> {
        Ok(self.coeffs[self.spec.flat(index)?])
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.spec.d(),
            "n": self.spec.n(),
            "kind": self.kind,
            "coeffs": self.coeffs,
        })
    }

    /// One row per cell: `i1,…,id,a`.
    pub fn to_csv(&self) -> String {
        let d = self.spec.d();
        let mut out = String::new();
        for k in 1..=d {
            let _ = write!(out, "i{k},");
        }
        out.push_str("a\n");
        let mut coords = vec![0; d];
        for (flat, a) in self.coeffs.iter().enumerate() {
            self.spec.write_coords0(flat, &mut coords);
            for c in &coords {
                let _ = write!(out, "{},", c + 1);
            }
            let _ = writeln!(out, "{a:?}");
        }
        out
    }
}

/// Computes the lower or upper envelope of `f` on the grid `spec`.
pub fn build_envelope(
    f: &Integrand,
    spec: GridSpec,
    kind: EnvelopeKind,
    sample_density: usize,
) -> Result<EnvelopeGrid, EnvelopeError> {
    if sample_density < 2 {
        return Err(EnvelopeError::SampleDensity(sample_density));
    }
    if f.arity() != spec.d() {
        return Err(EnvelopeError::DimensionMismatch {
            integrand: f.arity(),
            grid: spec.d(),
        });
    }
    let d = spec.d();
    let n = spec.n() as f64;
    let m = sample_density;
    let lattice = m.pow(d as u32);
    // offsets of the m lattice points within a unit-width cell, in cell units
    let steps: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();

    let coeffs = (0..spec.cell_count())
        .into_par_iter()
        .map_init(
            || (vec![0usize; d], vec![0usize; d], vec![0.0f64; d]),
            |(cell, digits, point), flat| {
                spec.write_coords0(flat, cell);
                let mut best = match kind {
                    EnvelopeKind::Lower => f64::INFINITY,
                    EnvelopeKind::Upper => f64::NEG_INFINITY,
                };
                for s in 0..lattice {
                    let mut rest = s;
                    for slot in digits.iter_mut().rev() {
                        *slot = rest % m;
                        rest /= m;
                    }
                    for k in 0..d {
                        point[k] = (cell[k] as f64 + steps[digits[k]]) / n;
                    }
                    let v = f.eval(point).map_err(|source| EnvelopeError::Eval {
                        cell: spec.unflat(flat),
                        source,
                    })?;
                    best = match kind {
                        EnvelopeKind::Lower => best.min(v),
                        EnvelopeKind::Upper => best.max(v),
                    };
                }
                Ok(best)
            },
        )
        .collect::<Result<Vec<f64>, EnvelopeError>>()?;

    EnvelopeGrid::from_coeffs(spec, kind, coeffs, sample_density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_integrand;

    fn env(src: &str, d: usize, n: usize, kind: EnvelopeKind, m: usize) -> EnvelopeGrid {
        let f = parse_integrand(src, d).unwrap();
        build_envelope(&f, GridSpec::new(d, n).unwrap(), kind, m).unwrap()
    }

    #[test]
    fn product_first_cell() {
        let lo = env("x1*x2*x3", 3, 2, EnvelopeKind::Lower, 2);
        let hi = env("x1*x2*x3", 3, 2, EnvelopeKind::Upper, 2);
        let c = CellIndex::new([1, 1, 1]);
        assert_eq!(lo.get(&c).unwrap(), 0.0);
        assert_eq!(hi.get(&c).unwrap(), 0.125);
    }

    #[test]
    fn product_lower_closed_form_n40() {
        let lo = env("x1*x2*x3", 3, 40, EnvelopeKind::Lower, 2);
        let spec = lo.spec();
        for flat in 0..spec.cell_count() {
            let i = spec.unflat(flat);
            let want = i.0.iter().map(|&c| (c - 1) as f64).product::<f64>() / 64000.0;
            assert!((lo.coeffs()[flat] - want).abs() <= 1e-15, "{i:?}");
        }
    }

    #[test]
    fn lower_below_upper_and_samples() {
        let src = "(x1-0.3)^2 + x1*x2 - 0.5*x2";
        let lo = env(src, 2, 6, EnvelopeKind::Lower, 4);
        let hi = env(src, 2, 6, EnvelopeKind::Upper, 4);
        for (a, b) in lo.coeffs().iter().zip(hi.coeffs()) {
            assert!(a <= b);
        }
    }

    #[test]
    fn rejects_small_density() {
        let f = parse_integrand("x1", 2).unwrap();
        let spec = GridSpec::new(2, 3).unwrap();
        assert_eq!(
            build_envelope(&f, spec, EnvelopeKind::Lower, 1).unwrap_err(),
            EnvelopeError::SampleDensity(1)
        );
    }

    #[test]
    fn reports_cell_of_domain_error() {
        let f = parse_integrand("log(x1)", 2).unwrap();
        let spec = GridSpec::new(2, 2).unwrap();
        match build_envelope(&f, spec, EnvelopeKind::Lower, 2) {
            Err(EnvelopeError::Eval { cell, source }) => {
                assert_eq!(cell, CellIndex::new([1, 1]));
                assert_eq!(source.point[0], 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_and_csv_export() {
        let lo = env("x1*x2", 2, 2, EnvelopeKind::Lower, 2);
        let j = lo.to_json();
        assert_eq!(j["d"], 2);
        assert_eq!(j["kind"], "lower");
        assert_eq!(j["coeffs"].as_array().unwrap().len(), 4);
        assert_eq!(j["coeffs"][3], 0.25);
        let csv = lo.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i1,i2,a");
        assert_eq!(lines[2], "1,2,0.0");
        assert_eq!(lines[4], "2,2,0.25");
    }

    #[test]
    fn from_coeffs_validates() {
        let spec = GridSpec::new(2, 2).unwrap();
        assert!(EnvelopeGrid::from_coeffs(spec, EnvelopeKind::Lower, vec![0.0; 3], 2).is_err());
        assert!(EnvelopeGrid::from_coeffs(
            spec,
            EnvelopeKind::Lower,
            vec![0.0, f64::NAN, 0.0, 0.0],
            2
        )
        .is_err());
    }
}
