use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tobit_core::estimation::InfoCriterion;
use tobit_core::io::CHF_EUR_KEY;
use tobit_core::rng::{InnovationLaw, DEFAULT_SEED};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success (statistical decisions never change the exit code)
  1  internal error
  2  usage error: unknown flag, missing or conflicting arguments
  3  input error: unreadable or malformed file, invalid parameter, key or date range
  4  numerical error: singular design, zero residual variance, too few observations
  5  network error: HTTP failure, empty or malformed SDMX payload";

#[derive(Debug, Parser)]
#[command(name = "tobit", version, about = "Dynamic Tobit autoregressions: simulation, estimation and unit-root testing", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for Monte Carlo work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a Tobit, linear or limited autoregression and emit a CSV path.
    Simulate(SimulateArgs),
    /// Fit the ADF regression by OLS.
    Estimate(EstimateArgs),
    /// Run the censoring-adjusted unit-root test.
    Test(TestArgs),
    /// Tabulate null critical values by nuisance ratio.
    Tabulate(TabulateArgs),
    /// Mean t-statistic and rejection rates over an (a, c) grid.
    Power(PowerArgs),
    /// Empirical CDF/PDF of the t-statistic.
    Dist(DistArgs),
    /// Joint-spectral-radius certificate for difference coefficients.
    Jsr(JsrArgs),
    /// Download a series from the ECB data portal.
    FetchEcb(FetchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Test(_) => "test",
            Command::Tabulate(_) => "tabulate",
            Command::Power(_) => "power",
            Command::Dist(_) => "dist",
            Command::Jsr(_) => "jsr",
            Command::FetchEcb(_) => "fetch-ecb",
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect()
}

/// Comma-separated reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(RealList)
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 1 {
            return parse_list(s).map(Grid);
        }
        if parts.len() != 3 {
            return Err("expected start:stop:step".into());
        }
        let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let (start, stop, step) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err("need step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Round away the binary representation error of the step.
        Ok(Grid((0..=n).map(|i| ((start + step * i as f64) * 1e10).round() / 1e10).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum KArg {
    Fixed(usize),
    #[serde(serialize_with = "ser_auto")]
    Auto,
}

fn ser_auto<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("auto")
}

impl FromStr for KArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KArg::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KArg::Fixed(k)),
            _ => Err(format!("expected a lag order >= 1 or \"auto\", got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for InfoCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => InfoCriterion::Aic,
            CriterionArg::Bic => InfoCriterion::Bic,
        }
    }
}

/// `gaussian`, `rademacher` or `student-t:DF`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LawArg(pub InnovationLaw);

impl FromStr for LawArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let law = match s {
            "gaussian" | "normal" => InnovationLaw::Gaussian,
            "rademacher" => InnovationLaw::Rademacher,
            _ => match s.strip_prefix("student-t:") {
                Some(df) => InnovationLaw::StudentT { df: df.parse().map_err(|e| format!("degrees of freedom: {e}"))? },
                None => return Err(format!("unknown law {s:?} (gaussian, rademacher, student-t:DF)")),
            },
        };
        law.validate().map_err(|e| e.to_string())?;
        Ok(LawArg(law))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "ecb_key"])))]
pub struct InputArgs {
    /// CSV with a `value` column or `date,value` columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// SDMX series key to download from the ECB instead of reading a file.
    #[arg(long)]
    pub ecb_key: Option<String>,
    #[arg(long, requires = "ecb_key", default_value = "2011-09-06")]
    pub start: NaiveDate,
    #[arg(long, requires = "ecb_key", default_value = "2015-01-15")]
    pub end: NaiveDate,
    /// Take natural logarithms of the values.
    #[arg(long)]
    pub log: bool,
    /// Lower bound on the analysis scale (after --log).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "bound_raw")]
    pub bound: Option<f64>,
    /// Lower bound on the raw scale (logged together with the data under --log).
    #[arg(long, allow_hyphen_values = true)]
    pub bound_raw: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LagArgs {
    /// Lag order k, or `auto` for information-criterion selection.
    #[arg(long, default_value = "1")]
    pub k: KArg,
    /// Largest k tried by `--k auto`.
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    #[arg(long, value_enum, default_value = "bic")]
    pub criterion: CriterionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimModel {
    Tobit,
    Linear,
    Limited,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Lag order; must agree with --phi when both are given.
    #[arg(long)]
    pub k: Option<usize>,
    /// Difference coefficients phi_1..phi_{k-1}.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    pub phi: RealList,
    /// Local drift: alpha = a / sqrt(T).
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub a: f64,
    /// Local exponent: beta = exp(c / T).
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub c: f64,
    /// Scaled start: y0 = b0 sqrt(T) + bound.
    #[arg(long, default_value_t = 0.0)]
    pub b0: f64,
    #[arg(long = "T", default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub bound: f64,
    #[arg(long, value_enum, default_value = "tobit")]
    pub model: SimModel,
    #[arg(long, default_value = "gaussian")]
    pub law: LawArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub lag: LagArgs,
    /// Include residuals in the output.
    #[arg(long)]
    pub residuals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Finite,
    Limit,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub lag: LagArgs,
    /// Critical-value table CSV (with its JSON sidecar); default is the built-in table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Replications for the simulated-null p-value (0 disables it).
    #[arg(long, default_value_t = 0)]
    pub sim_reps: u64,
    /// Path length for the finite-sample null.
    #[arg(long = "sim-T", default_value_t = 100_000)]
    pub sim_t: usize,
    #[arg(long, value_enum, default_value = "finite")]
    pub backend: BackendArg,
    /// Grid steps for the limit backend.
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    /// Bootstrap replications (0 disables the bootstrap; otherwise >= 99).
    #[arg(long, default_value_t = 0)]
    pub boot_reps: u64,
    /// Bootstrap path length (default: sample length).
    #[arg(long = "boot-T")]
    pub boot_t: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TabulateArgs {
    /// Ratio grid `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:2:0.1")]
    pub ratios: Grid,
    #[arg(long = "T", default_value_t = 100_000)]
    pub t: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value = "gaussian")]
    pub law: LawArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    #[arg(long, allow_hyphen_values = true, default_value = "-5,-2,-1,0,1,2,5")]
    pub a_grid: RealList,
    #[arg(long, allow_hyphen_values = true, default_value = "-5,-2,-1,0,1,2,5")]
    pub c_grid: RealList,
    #[arg(long = "T", default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    /// Critical-value table for the Tobit and ADF cutoffs.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Significance level in percent (1, 5 or 10).
    #[arg(long, default_value_t = 5.0)]
    pub level: f64,
    #[arg(long, default_value = "gaussian")]
    pub law: LawArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistModelArg {
    Tobit,
    Linear,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistArgs {
    /// Models to simulate on common innovations.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tobit,linear")]
    pub models: Vec<DistModelArg>,
    /// Nuisance ratio b0 / sigma of the unit-root design.
    #[arg(long, default_value_t = 0.0)]
    pub ratio: f64,
    #[arg(long = "T", default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -8.0)]
    pub lo: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 4.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 240)]
    pub bins: usize,
    #[arg(long, default_value = "gaussian")]
    pub law: LawArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JsrArgs {
    /// Difference coefficients phi_1..phi_{k-1}.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: RealList,
    /// Longest product length explored.
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Bound gap below which the certificate counts as conclusive.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Also simulate the Tobit model (beta = 1) and classify its differences.
    #[arg(long)]
    pub probe: bool,
    #[arg(long = "T", default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FetchArgs {
    #[arg(long, default_value = CHF_EUR_KEY)]
    pub key: String,
    #[arg(long, default_value = "2011-09-06")]
    pub start: NaiveDate,
    #[arg(long, default_value = "2015-01-15")]
    pub end: NaiveDate,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!("0:0.3:0.1".parse::<Grid>().unwrap().0, vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!("0,0.5,2".parse::<Grid>().unwrap().0, vec![0.0, 0.5, 2.0]);
        assert_eq!("0:2.5:0.1".parse::<Grid>().unwrap().0.len(), 26);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn k_and_law_parsing() {
        assert_eq!("auto".parse::<KArg>().unwrap(), KArg::Auto);
        assert_eq!("3".parse::<KArg>().unwrap(), KArg::Fixed(3));
        assert!("0".parse::<KArg>().is_err());
        assert_eq!("student-t:5".parse::<LawArg>().unwrap().0, InnovationLaw::StudentT { df: 5.0 });
        assert!("student-t:2".parse::<LawArg>().is_err());
        assert!("cauchy".parse::<LawArg>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
