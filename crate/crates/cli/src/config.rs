//! Run configuration: flags and optional JSON config file, merged and validated.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use copula_bounds::{EnvelopeKind, Sense};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Enclose the optimal copula integral of an expression.
    Bound,
    /// Enclose the minimal multivariate Spearman's rho.
    Rho,
    /// Run `bound` for an increasing list of grid sizes.
    Sweep,
    /// Write the optimal grid copula.
    ExportCopula,
    /// Re-solve and check the result against oracles and certificates.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SenseArg {
    Min,
    Max,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Min => Sense::Minimize,
            SenseArg::Max => Sense::Maximize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeArg {
    Lower,
    Upper,
}

impl From<EnvelopeArg> for EnvelopeKind {
    fn from(e: EnvelopeArg) -> Self {
        match e {
            EnvelopeArg::Lower => EnvelopeKind::Lower,
            EnvelopeArg::Upper => EnvelopeKind::Upper,
        }
    }
}

/// Command-line flags. Every option may also come from `--config`.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "copula-bounds",
    version,
    about = "Bounds on copula integrals via grid assignment LPs"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON file with any of the option keys below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub options: Options,
}

/// Options that may be set by flag or config file.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Integrand in x1..xd, e.g. "x1*x2*x3".
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid size per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated increasing grid sizes for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub sense: Option<SenseArg>,
    /// Lattice points per axis and cell for the envelopes.
    #[arg(long)]
    pub sample_density: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Envelope whose optimal copula `export-copula` writes.
    #[arg(long, value_enum)]
    pub envelope: Option<EnvelopeArg>,
    /// `export-copula`: write the CDF on a regular grid to this CSV file.
    #[arg(long)]
    pub cdf_csv: Option<PathBuf>,
    /// Evaluation points per axis for `--cdf-csv`.
    #[arg(long)]
    pub cdf_points: Option<usize>,
    /// `export-copula`: write this many samples to `--samples-csv`.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub samples_csv: Option<PathBuf>,
    /// `verify`: random tuples for the cyclical monotonicity check.
    #[arg(long)]
    pub tuples: Option<usize>,
    /// `verify`: tuple size N for the cyclical monotonicity check.
    #[arg(long)]
    pub tuple_size: Option<usize>,
    /// Simplex pivot budget; defaults to a size-dependent limit.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

impl Options {
    /// Fills every unset field from `base`.
    pub fn or(self, base: Options) -> Options {
        Options {
            f: self.f.or(base.f),
            d: self.d.or(base.d),
            n: self.n.or(base.n),
            n_list: self.n_list.or(base.n_list),
            sense: self.sense.or(base.sense),
            sample_density: self.sample_density.or(base.sample_density),
            seed: self.seed.or(base.seed),
            format: self.format.or(base.format),
            output: self.output.or(base.output),
            envelope: self.envelope.or(base.envelope),
            cdf_csv: self.cdf_csv.or(base.cdf_csv),
            cdf_points: self.cdf_points.or(base.cdf_points),
            samples: self.samples.or(base.samples),
            samples_csv: self.samples_csv.or(base.samples_csv),
            tuples: self.tuples.or(base.tuples),
            tuple_size: self.tuple_size.or(base.tuple_size),
            max_iterations: self.max_iterations.or(base.max_iterations),
        }
    }

    pub fn from_file(path: &Path) -> Result<Options, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved and validated configuration; echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    pub sense: SenseArg,
    pub sample_density: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuple_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn forbid<T>(command: Command, flag: &str, value: &Option<T>) -> Result<(), CliError> {
    if value.is_some() {
        let name = command.to_possible_value().expect("no skipped variants");
        return Err(usage(format!(
            "--{flag} is not used by `{}`",
            name.get_name()
        )));
    }
    Ok(())
}

impl RunConfig {
    /// Parses flags and merges the optional config file underneath them.
    pub fn from_cli(cli: Cli) -> Result<RunConfig, CliError> {
        let options = match &cli.config {
            Some(path) => cli.options.or(Options::from_file(path)?),
            None => cli.options,
        };
        RunConfig::resolve(cli.command, options)
    }

    /// Applies defaults and checks that the options fit the command.
    pub fn resolve(command: Command, o: Options) -> Result<RunConfig, CliError> {
        use Command::*;
        let d = o.d.ok_or_else(|| usage("--d is required"))?;
        if d < 2 {
            return Err(usage(format!("--d must be at least 2, got {d}")));
        }
        match command {
            Rho => {
                forbid(command, "f", &o.f)?;
                forbid(command, "sense", &o.sense)?;
            }
            _ if o.f.is_none() => return Err(usage("--f is required")),
            _ => {}
        }
        if command == Sweep {
            forbid(command, "n", &o.n)?;
            if o.n_list.as_ref().is_none_or(|l| l.is_empty()) {
                return Err(usage("--n-list is required, e.g. --n-list 5,10,20"));
            }
        } else {
            forbid(command, "n-list", &o.n_list)?;
            if o.n.is_none() {
                return Err(usage("--n is required"));
            }
        }
        if command != ExportCopula {
            forbid(command, "envelope", &o.envelope)?;
            forbid(command, "cdf-csv", &o.cdf_csv)?;
            forbid(command, "cdf-points", &o.cdf_points)?;
            forbid(command, "samples", &o.samples)?;
            forbid(command, "samples-csv", &o.samples_csv)?;
        } else {
            if o.samples.is_some() != o.samples_csv.is_some() {
                return Err(usage("--samples and --samples-csv must be given together"));
            }
            if o.cdf_points.is_some() && o.cdf_csv.is_none() {
                return Err(usage("--cdf-points needs --cdf-csv"));
            }
            if o.cdf_points.is_some_and(|p| p < 2) {
                return Err(usage("--cdf-points must be at least 2"));
            }
        }
        if command != Verify {
            forbid(command, "tuples", &o.tuples)?;
            forbid(command, "tuple-size", &o.tuple_size)?;
        } else if o.tuple_size.is_some_and(|t| !(2..=4).contains(&t)) {
            return Err(usage("--tuple-size must be between 2 and 4"));
        }
        let sample_density = o.sample_density.unwrap_or(2);
        if sample_density < 2 {
            return Err(usage("--sample-density must be at least 2"));
        }

        let export = command == ExportCopula;
        let verify = command == Verify;
        Ok(RunConfig {
            command,
            f: o.f,
            d,
            n: o.n,
            n_list: o.n_list,
            sense: o.sense.unwrap_or(SenseArg::Min),
            sample_density,
            seed: o.seed.unwrap_or(0),
            format: o.format.unwrap_or(Format::Json),
            output: o.output,
            envelope: export.then(|| o.envelope.unwrap_or(EnvelopeArg::Lower)),
            cdf_points: o.cdf_csv.as_ref().map(|_| o.cdf_points.unwrap_or(11)),
            cdf_csv: o.cdf_csv,
            samples: o.samples,
            samples_csv: o.samples_csv,
            tuples: verify.then(|| o.tuples.unwrap_or(1000)),
            tuple_size: verify.then(|| o.tuple_size.unwrap_or(4)),
            max_iterations: o.max_iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut full = vec!["copula-bounds"];
        full.extend_from_slice(args);
        RunConfig::from_cli(Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn defaults() {
        let c = parse(&["bound", "--f", "x1*x2", "--d", "2", "--n", "4"]).unwrap();
        assert_eq!(c.sense, SenseArg::Min);
        assert_eq!(c.sample_density, 2);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.tuples, None);
        let v = parse(&["verify", "--f", "x1", "--d", "2", "--n", "2"]).unwrap();
        assert_eq!((v.tuples, v.tuple_size), (Some(1000), Some(4)));
    }

    #[test]
    fn n_list_parses() {
        let c = parse(&["sweep", "--f", "x1", "--d", "2", "--n-list", "5,10,20"]).unwrap();
        assert_eq!(c.n_list, Some(vec![5, 10, 20]));
    }

    #[test]
    fn usage_errors() {
        assert!(parse(&["bound", "--d", "2", "--n", "4"]).is_err());
        assert!(parse(&["bound", "--f", "x1", "--n", "4"]).is_err());
        assert!(parse(&["bound", "--f", "x1", "--d", "1", "--n", "4"]).is_err());
        assert!(parse(&["rho", "--f", "x1", "--d", "3", "--n", "4"]).is_err());
        assert!(parse(&["sweep", "--f", "x1", "--d", "2", "--n", "4"]).is_err());
        assert!(parse(&["bound", "--f", "x1", "--d", "2", "--n", "4", "--tuples", "5"]).is_err());
        assert!(parse(&[
            "bound",
            "--f",
            "x1",
            "--d",
            "2",
            "--n",
            "4",
            "--sample-density",
            "1"
        ])
        .is_err());
        let e = parse(&["rho", "--d", "3", "--n", "4", "--sense", "max"]).unwrap_err();
        assert!(e.to_string().contains("--sense"), "{e}");
    }

    #[test]
    fn flags_override_config() {
        let file = Options {
            f: Some("x1+x2".into()),
            d: Some(2),
            n: Some(3),
            sense: Some(SenseArg::Max),
            ..Default::default()
        };
        let flags = Options {
            n: Some(7),
            ..Default::default()
        };
        let c = RunConfig::resolve(Command::Bound, flags.or(file)).unwrap();
        assert_eq!(c.n, Some(7));
        assert_eq!(c.sense, SenseArg::Max);
        assert_eq!(c.f.as_deref(), Some("x1+x2"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let r: Result<Options, _> = serde_json::from_str(r#"{"d": 2, "grid": 4}"#);
        assert!(r.is_err());
    }
}
