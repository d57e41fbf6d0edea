//! Command-line driver for `copula-bounds`.
//!
//! [`execute`] turns a resolved [`RunConfig`] into report text plus an exit
//! code; the binary only parses flags and prints.

pub mod config;
mod fmt;

use std::path::Path;

use copula_bounds::oracles::{CERTIFICATE_TOL, MAX_PERMUTATION_N, MAX_VERTEX_VARIABLES};
use copula_bounds::{
    bound_detailed, brute_force_2ap, brute_force_dap_vertices, build_dap, build_envelope, certify,
    check_cyclical_monotonicity, convergence_sweep, parse_integrand, points_to_csv,
    rho_bounds_with, solve_hungarian, solve_relaxed_with, sweep_csv, BoundOptions, BoundReport,
    DiscreteCopula, EnvelopeKind, Error, GridSpec, Integrand, MonotonicityHint, RhoSpec, Sense,
    Side, SolverOptions, SweepEntry,
};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error as ThisError;

pub use config::{Cli, Command, EnvelopeArg, Format, Options, RunConfig, SenseArg};
pub use fmt::sig6;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Report in the requested format.
    pub text: String,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(text: String, warnings: Vec<String>) -> Self {
        Outcome {
            text,
            warnings,
            exit_code: EXIT_OK,
        }
    }
}

/// Runs the configured command. Files requested by `export-copula` are
/// written here; the report itself is returned.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        Command::Bound => run_bound(config),
        Command::Rho => run_rho(config),
        Command::Sweep => run_sweep(config),
        Command::ExportCopula => run_export(config),
        Command::Verify => run_verify(config),
    }
}

/// Executes and delivers the report to `config.output` or stdout.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    match &config.output {
        Some(path) => {
            if let Err(e) = write_file(path, &outcome.text) {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
        None => print!("{}", outcome.text),
    }
    outcome.exit_code
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn options(config: &RunConfig) -> BoundOptions {
    BoundOptions {
        sample_density: config.sample_density,
        solver: SolverOptions {
            max_iterations: config.max_iterations,
            ..Default::default()
        },
    }
}

fn integrand(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Integrand, CliError> {
    let src = config.f.as_deref().expect("validated");
    let f = parse_integrand(src, config.d).map_err(Error::from)?;
    if f.monotonicity_hint() == MonotonicityHint::Unknown && config.sample_density < 5 {
        warnings.push(format!(
            "monotonicity of `{src}` could not be established; cell extrema from {} lattice \
             points per axis may be inexact (raise --sample-density)",
            config.sample_density
        ));
    }
    Ok(f)
}

fn spec(config: &RunConfig) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(config.d, config.n.expect("validated")).map_err(Error::from)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn with_config(config: &RunConfig, key: &str, value: impl Serialize) -> Value {
    json!({ "config": config, key: value })
}

fn report_text(config: &RunConfig, report: BoundReport) -> String {
    match config.format {
        Format::Json => to_json(&with_config(config, "report", &report)),
        Format::Csv => sweep_csv(&[SweepEntry {
            n: report.n,
            result: Ok(report),
        }]),
        Format::Human => fmt::report_human(&report),
    }
}

fn run_bound(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let f = integrand(config, &mut warnings)?;
    let mut report =
        bound_detailed(&f, spec(config)?, config.sense.into(), &options(config))?.report;
    if f.is_coordinate_product() && config.sense == SenseArg::Min {
        report = report.with_rho(&RhoSpec::new(config.d)?);
    }
    Ok(Outcome::ok(report_text(config, report), warnings))
}

fn run_rho(config: &RunConfig) -> Result<Outcome, CliError> {
    let report = rho_bounds_with(spec(config)?, &options(config))?;
    Ok(Outcome::ok(report_text(config, report), Vec::new()))
}

fn run_sweep(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let f = integrand(config, &mut warnings)?;
    let n_list = config.n_list.as_deref().expect("validated");
    let mut entries =
        convergence_sweep(&f, config.d, config.sense.into(), n_list, &options(config))?;
    if f.is_coordinate_product() && config.sense == SenseArg::Min {
        let rho = RhoSpec::new(config.d)?;
        for e in &mut entries {
            if let Ok(r) = &mut e.result {
                *r = r.clone().with_rho(&rho);
            }
        }
    }
    let exit_code = entries
        .iter()
        .filter_map(|e| e.result.as_ref().err())
        .map(|e| CliError::Core(e.clone()).exit_code())
        .max()
        .unwrap_or(EXIT_OK);
    let text = match config.format {
        Format::Json => {
            let rows: Vec<Value> = entries
                .iter()
                .map(|e| match &e.result {
                    Ok(r) => json!({ "n": e.n, "report": r }),
                    Err(err) => json!({ "n": e.n, "error": err.to_string() }),
                })
                .collect();
            to_json(&with_config(config, "entries", rows))
        }
        Format::Csv => sweep_csv(&entries),
        Format::Human => fmt::sweep_human(&entries),
    };
    Ok(Outcome {
        text,
        warnings,
        exit_code,
    })
}

fn run_export(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let f = integrand(config, &mut warnings)?;
    let spec = spec(config)?;
    let kind: EnvelopeKind = config.envelope.expect("validated").into();
    let opts = options(config);
    let grid = build_envelope(&f, spec, kind, opts.sample_density).map_err(Error::from)?;
    let instance =
        build_dap(&grid, config.sense.into(), 1.0 / spec.n() as f64).map_err(Error::from)?;
    let solution = solve_relaxed_with(&instance, &opts.solver)
        .and_then(|s| s.into_optimal())
        .map_err(Error::from)?;
    let copula = DiscreteCopula::from_solution(&solution).map_err(Error::from)?;

    if let (Some(path), Some(points)) = (&config.cdf_csv, config.cdf_points) {
        write_file(path, &copula.cdf_grid_csv(points))?;
    }
    if let (Some(path), Some(count)) = (&config.samples_csv, config.samples) {
        write_file(
            path,
            &points_to_csv(spec.d(), &copula.sample(count, config.seed)),
        )?;
    }

    let text = match config.format {
        Format::Json => to_json(&json!({
            "config": config,
            "value": solution.value(),
            "iterations": solution.iterations(),
            "copula": copula.to_json(),
        })),
        Format::Csv => fmt::support_csv(&copula),
        Format::Human => fmt::copula_human(&copula, solution.value()),
    };
    Ok(Outcome::ok(text, warnings))
}

/// One verification check on one side of the enclosure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub side: EnvelopeArg,
    pub name: &'static str,
    pub passed: bool,
    pub detail: Value,
}

fn run_verify(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let f = integrand(config, &mut warnings)?;
    let sense: Sense = config.sense.into();
    let run = bound_detailed(&f, spec(config)?, sense, &options(config))?;
    let mut checks = Vec::new();
    for (arg, side) in [
        (EnvelopeArg::Lower, &run.lower),
        (EnvelopeArg::Upper, &run.upper),
    ] {
        verify_side(config, arg, side, &mut checks)?;
    }
    let passed = checks.iter().all(|c| c.passed);
    let text = match config.format {
        Format::Json => to_json(&json!({
            "config": config,
            "report": run.report,
            "checks": checks,
            "passed": passed,
        })),
        Format::Csv => fmt::checks_csv(&checks),
        Format::Human => fmt::checks_human(&run.report, &checks, passed),
    };
    Ok(Outcome {
        text,
        warnings,
        exit_code: if passed { EXIT_OK } else { EXIT_VERIFY },
    })
}

fn verify_side(
    config: &RunConfig,
    arg: EnvelopeArg,
    side: &Side,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    let spec = side.grid.spec();
    let n = spec.n();
    let sense = side.instance.sense();
    let value = side.solution.value();
    let scale = side.grid.max_abs().max(1.0);
    let mut push = |name, passed, detail| {
        checks.push(Check {
            side: arg,
            name,
            passed,
            detail,
        })
    };

    let dual = certify(&side.instance, &side.solution, CERTIFICATE_TOL);
    push(
        "dual_certificate",
        dual.passed,
        serde_json::to_value(&dual).expect("serializable"),
    );

    let worst_slice = side
        .copula
        .slice_sums()
        .iter()
        .map(|s| (s - 1.0 / n as f64).abs())
        .fold(0.0, f64::max);
    push(
        "stochasticity",
        worst_slice <= 1e-9,
        json!({ "max_slice_deviation": worst_slice }),
    );

    let integral = side
        .copula
        .integrate_cellwise(&side.grid)
        .map_err(Error::from)?;
    push(
        "integral_consistency",
        (integral - value).abs() <= 1e-9 * scale,
        json!({ "solution_value": value, "copula_integral": integral }),
    );

    let cert = check_cyclical_monotonicity(
        &side.copula,
        &side.grid,
        sense,
        config.tuples.expect("validated"),
        config.tuple_size.expect("validated"),
        config.seed,
    )
    .map_err(Error::from)?;
    push(
        "cyclical_monotonicity",
        cert.passed,
        serde_json::to_value(&cert).expect("serializable"),
    );

    if spec.d() == 2 {
        let rows: Vec<Vec<f64>> = side.grid.coeffs().chunks(n).map(<[f64]>::to_vec).collect();
        let hungarian = solve_hungarian(&rows, sense).map_err(Error::from)?.value / n as f64;
        push(
            "hungarian",
            (hungarian - value).abs() <= 1e-9 * scale,
            json!({ "solution_value": value, "oracle_value": hungarian }),
        );
        if n <= MAX_PERMUTATION_N {
            let brute = brute_force_2ap(&rows, sense).map_err(Error::from)?.value / n as f64;
            push(
                "brute_force_assignment",
                (brute - value).abs() <= 1e-9 * scale,
                json!({ "solution_value": value, "oracle_value": brute }),
            );
        }
    }
    if spec.cell_count() <= MAX_VERTEX_VARIABLES {
        let vertex = brute_force_dap_vertices(&side.instance).map_err(Error::from)?;
        push(
            "vertex_enumeration",
            (vertex - value).abs() <= 1e-9 * scale,
            json!({ "solution_value": value, "oracle_value": vertex }),
        );
    }
    Ok(())
}
