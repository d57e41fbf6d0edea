//! Bound pipeline: envelope → relaxed d-AP → grid copula → value.
//!
//! Both envelopes are always solved. For either sense the optimum over all
//! copulas of `∫ f dC` lies between the optimum for the lower envelope and
//! the optimum for the upper envelope, so every report is a rigorous
//! enclosure whenever the cell extrema are exact.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::DiscreteCopula;
use crate::dap::{build_dap, solve_relaxed_with, DapInstance, DapSolution, Sense, SolverOptions};
use crate::expr::{parse_integrand, Integrand};
use crate::funcgrid::{build_envelope, EnvelopeGrid, EnvelopeKind};
use crate::grid::GridSpec;
use crate::Error;

/// Multivariate Spearman's rho normalisation for dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSpec {
    pub d: usize,
    /// `(d+1) / (2^d − (d+1))`
    pub coefficient: f64,
    /// Known lower bound `(2^d − (d+1)!) / (d! (2^d − (d+1)))`.
    pub l_d: f64,
}

impl RhoSpec {
    pub fn new(d: usize) -> Result<Self, Error> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("rho needs d >= 2, got {d}")));
        }
        let two_d = 2f64.powi(d as i32);
        let d1 = (d + 1) as f64;
        let fact_d: f64 = (1..=d).map(|k| k as f64).product();
        let fact_d1 = fact_d * d1;
        Ok(RhoSpec {
            d,
            coefficient: d1 / (two_d - d1),
            l_d: (two_d - fact_d1) / (fact_d * (two_d - d1)),
        })
    }
}

/// `ρ = coefficient · (2^d · v − 1)` for `v = ∫ Π dC`.
pub fn rho_from_integral(v: f64, spec: &RhoSpec) -> f64 {
    spec.coefficient * (2f64.powi(spec.d as i32) * v - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundOptions {
    pub sample_density: usize,
    pub solver: SolverOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            sample_density: 2,
            solver: SolverOptions::default(),
        }
    }
}

/// Two-sided enclosure of `opt_C ∫ f dC` at one grid size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub n: usize,
    pub sense: Sense,
    /// Optimum with the lower envelope.
    pub lower_value: f64,
    /// Optimum with the upper envelope.
    pub upper_value: f64,
    pub gap: f64,
    pub rho_lower: Option<f64>,
    pub rho_upper: Option<f64>,
    pub l_d: Option<f64>,
    /// Support size of the lower-envelope optimum.
    pub support_size: usize,
    pub wall_time: f64,
}

impl BoundReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Attaches the Spearman's rho transform of both endpoints.
    pub fn with_rho(mut self, spec: &RhoSpec) -> Self {
        self.rho_lower = Some(rho_from_integral(self.lower_value, spec));
        self.rho_upper = Some(rho_from_integral(self.upper_value, spec));
        self.l_d = Some(spec.l_d);
        self
    }
}

/// Everything produced by one [`bound_detailed`] run.
#[derive(Debug, Clone)]
pub struct BoundRun {
    pub report: BoundReport,
    pub lower: Side,
    pub upper: Side,
}

/// Envelope, LP and optimal copula for one envelope kind.
#[derive(Debug, Clone)]
pub struct Side {
    pub grid: EnvelopeGrid,
    pub instance: DapInstance,
    pub solution: DapSolution,
    pub copula: DiscreteCopula,
}

fn solve_side(
    f: &Integrand,
    spec: GridSpec,
    kind: EnvelopeKind,
    sense: Sense,
    options: &BoundOptions,
) -> Result<Side, Error> {
    let grid = build_envelope(f, spec, kind, options.sample_density)?;
    let instance = build_dap(&grid, sense, 1.0 / spec.n() as f64)?;
    let solution = solve_relaxed_with(&instance, &options.solver)?.into_optimal()?;
    let copula = DiscreteCopula::from_solution(&solution)?;
    Ok(Side {
        grid,
        instance,
        solution,
        copula,
    })
}

/// Runs the pipeline for both envelopes and keeps all intermediate results.
pub fn bound_detailed(
    f: &Integrand,
    spec: GridSpec,
    sense: Sense,
    options: &BoundOptions,
) -> Result<BoundRun, Error> {
    let start = Instant::now();
    let (lower, upper) = rayon::join(
        || solve_side(f, spec, EnvelopeKind::Lower, sense, options),
        || solve_side(f, spec, EnvelopeKind::Upper, sense, options),
    );
    let (lower, upper) = (lower?, upper?);
    let lower_value = lower.solution.value();
    let upper_value = upper.solution.value();
    let report = BoundReport {
        d: spec.d(),
        n: spec.n(),
        sense,
        lower_value,
        upper_value,
        gap: upper_value - lower_value,
        rho_lower: None,
        rho_upper: None,
        l_d: None,
        support_size: lower.solution.support_len(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(BoundRun {
        report,
        lower,
        upper,
    })
}

/// Enclosure of the optimal copula integral of `f` on the grid `spec`.
pub fn bound(
    f: &Integrand,
    spec: GridSpec,
    sense: Sense,
    sample_density: usize,
) -> Result<BoundReport, Error> {
    let options = BoundOptions {
        sample_density,
        ..Default::default()
    };
    Ok(bound_detailed(f, spec, sense, &options)?.report)
}

/// The product integrand `x1*…*xd`.
pub fn independence_integrand(d: usize) -> Result<Integrand, Error> {
    let src = (1..=d)
        .map(|k| format!("x{k}"))
        .collect::<Vec<_>>()
        .join("*");
    Ok(parse_integrand(&src, d)?)
}

/// Enclosure of the minimal multivariate Spearman's rho.
pub fn rho_bounds(spec: GridSpec) -> Result<BoundReport, Error> {
    rho_bounds_with(spec, &BoundOptions::default())
}

pub fn rho_bounds_with(spec: GridSpec, options: &BoundOptions) -> Result<BoundReport, Error> {
    let rho = RhoSpec::new(spec.d())?;
    let f = independence_integrand(spec.d())?;
    let run = bound_detailed(&f, spec, Sense::Minimize, options)?;
    Ok(run.report.with_rho(&rho))
}

/// Outcome of one grid size in a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub n: usize,
    pub result: Result<BoundReport, Error>,
}

/// One report per grid size, in the order of `n_list`.
pub fn convergence_sweep(
    f: &Integrand,
    d: usize,
    sense: Sense,
    n_list: &[usize],
    options: &BoundOptions,
) -> Result<Vec<SweepEntry>, Error> {
    if n_list.is_empty() {
        return Err(Error::InvalidInput("grid size list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "grid sizes must be strictly increasing".into(),
        ));
    }
    let specs = n_list
        .iter()
        .map(|&n| GridSpec::new(d, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(specs
        .par_iter()
        .map(|&spec| SweepEntry {
            n: spec.n(),
            result: bound_detailed(f, spec, sense, options).map(|r| r.report),
        })
        .collect())
}

/// Sweep as CSV, one row per grid size. Failed sizes carry their error.
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from(
        "n,sense,lower_value,upper_value,gap,rho_lower,rho_upper,support_size,wall_time,error\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for e in entries {
        match &e.result {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{:?},{},{},{},{:?},",
                    r.n,
                    r.sense.short(),
                    r.lower_value,
                    r.upper_value,
                    r.gap,
                    opt(r.rho_lower),
                    opt(r.rho_upper),
                    r.support_size,
                    r.wall_time
                );
            }
            Err(err) => {
                let msg = err.to_string().replace(['"', ','], " ");
                let _ = writeln!(out, "{},,,,,,,,,{msg}", e.n);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_spec_constants() {
        let r2 = RhoSpec::new(2).unwrap();
        assert_eq!(r2.coefficient, 3.0);
        assert_eq!(r2.l_d, -1.0);
        let r3 = RhoSpec::new(3).unwrap();
        assert_eq!(r3.coefficient, 1.0);
        assert!((r3.l_d + 2.0 / 3.0).abs() < 1e-15);
        assert!(RhoSpec::new(1).is_err());
    }

    #[test]
    fn rho_transform_examples() {
        let r3 = RhoSpec::new(3).unwrap();
        assert_eq!(rho_from_integral(1.0 / 8.0, &r3), 0.0);
        assert_eq!(rho_from_integral(1.0 / 4.0, &r3), 1.0);
        let r2 = RhoSpec::new(2).unwrap();
        assert!((rho_from_integral(1.0 / 6.0, &r2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_integrand_has_no_gap() {
        for d in [2, 3] {
            let f = parse_integrand("7", d).unwrap();
            let r = bound(&f, GridSpec::new(d, 3).unwrap(), Sense::Minimize, 2).unwrap();
            assert!((r.lower_value - 7.0).abs() < 1e-12);
            assert!((r.upper_value - 7.0).abs() < 1e-12);
            assert!(r.gap.abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let f = parse_integrand("x1", 2).unwrap();
        let opts = BoundOptions::default();
        assert!(convergence_sweep(&f, 2, Sense::Minimize, &[5, 5], &opts).is_err());
        assert!(convergence_sweep(&f, 2, Sense::Minimize, &[], &opts).is_err());
    }

    #[test]
    fn sweep_constant_has_zero_gaps() {
        let f = parse_integrand("3", 2).unwrap();
        let entries =
            convergence_sweep(&f, 2, Sense::Maximize, &[2, 4, 8], &BoundOptions::default())
                .unwrap();
        let ns: Vec<usize> = entries.iter().map(|e| e.n).collect();
        assert_eq!(ns, vec![2, 4, 8]);
        for e in &entries {
            assert!(e.result.as_ref().unwrap().gap.abs() < 1e-12);
        }
        let csv = sweep_csv(&entries);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("2,max,"));
    }

    #[test]
    fn report_json_fields() {
        let f = parse_integrand("x1*x2", 2).unwrap();
        let r = bound(&f, GridSpec::new(2, 4).unwrap(), Sense::Minimize, 2)
            .unwrap()
            .with_rho(&RhoSpec::new(2).unwrap());
        let j = r.to_json();
        for key in [
            "n",
            "sense",
            "lower_value",
            "upper_value",
            "gap",
            "rho_lower",
            "rho_upper",
            "l_d",
            "support_size",
            "wall_time",
        ] {
            assert!(j.get(key).is_some(), "missing {key}");
        }
        assert_eq!(j["sense"], "minimize");
    }
}
