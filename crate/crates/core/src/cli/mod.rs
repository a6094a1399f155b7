//! Command-line front end: `fit`, `forecast`, `backtest`, `grid-search`,
//! `excess` and `simulate`.
//!
//! Settings come from flags and an optional `--config` file of `key = value`
//! lines (TOML); flags win. Exit code 2 means invalid input, 3 a numerical
//! failure in the solver.

mod commands;
pub mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::basis::SplineSettings;
use crate::design::{ModelKind, PenaltyConfig};
use crate::evaluation::LambdaGrid;
use crate::excess::Period;
use crate::timeseries::MonthKey;

pub use commands::{cmd_backtest, cmd_excess, cmd_fit, cmd_forecast, cmd_grid_search, cmd_simulate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub(crate) fn in_stratum(stratum: &str, err: crate::Error) -> Self {
        let msg = format!("{stratum}: {err}");
        if err.is_numerical() {
            CliError::Solver(msg)
        } else {
            CliError::Validation(msg)
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(err: crate::Error) -> Self {
        if err.is_numerical() {
            CliError::Solver(err.to_string())
        } else {
            CliError::Validation(err.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mortcast", version, about = "Seasonal mortality baselines, forecasts and excess deaths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write fitted values, trend and fit statistics.
    Fit(CommonArgs),
    /// Forecast past the end of the fit window with 95% intervals.
    Forecast(CommonArgs),
    /// One-year-ahead rolling-window backtest.
    Backtest(CommonArgs),
    /// Choose smoothing parameters by minimum backtest mean MAPE.
    GridSearch(CommonArgs),
    /// Forecast a baseline and report excess deaths per month and period.
    Excess(CommonArgs),
    /// Write a synthetic deaths file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key = value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub deaths: Option<PathBuf>,
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// sp, stss or stfs.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub window_years: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_trend: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_season: Option<f64>,
    #[arg(long)]
    pub order_trend: Option<usize>,
    #[arg(long)]
    pub order_season: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub segments_per_year: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only process this stratum.
    #[arg(long)]
    pub stratum: Option<String>,
    /// First fitted month, YYYY-MM.
    #[arg(long)]
    pub fit_start: Option<String>,
    /// Last fitted month, YYYY-MM.
    #[arg(long)]
    pub fit_end: Option<String>,
    /// Comma-separated trend smoothing values for grid-search.
    #[arg(long, value_delimiter = ',')]
    pub grid_trend: Option<Vec<f64>>,
    /// Comma-separated seasonal smoothing values for grid-search.
    #[arg(long, value_delimiter = ',')]
    pub grid_season: Option<Vec<f64>>,
    /// Excess period as LABEL:YYYY-MM:YYYY-MM; repeatable.
    #[arg(long = "period")]
    pub periods: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "SIM")]
    pub stratum: String,
    #[arg(long, default_value = "2010-01")]
    pub start: String,
    #[arg(long, default_value_t = 132)]
    pub months: usize,
    /// Log expected deaths at t = 0.
    #[arg(long, default_value_t = 8.0)]
    pub level: f64,
    #[arg(long, default_value_t = -0.001, allow_hyphen_values = true)]
    pub slope: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub curvature: f64,
    /// Cosine amplitude on the log scale.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub amplitude: f64,
    /// Cosine amplitude at the last month; defaults to --amplitude.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude_end: Option<f64>,
    #[arg(long, default_value_t = 0.03, allow_hyphen_values = true)]
    pub sine: f64,
    /// First shocked month, YYYY-MM.
    #[arg(long)]
    pub shock_start: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub shock_months: usize,
    #[arg(long, default_value_t = 1.3)]
    pub shock_factor: f64,
    /// 1 January population of the first year; also writes population.csv.
    #[arg(long)]
    pub population: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub population_growth: f64,
}

/// Fully resolved settings for the analysis commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub deaths: PathBuf,
    pub population: Option<PathBuf>,
    pub model: ModelKind,
    pub window_years: usize,
    pub horizon: usize,
    pub penalty: PenaltyConfig,
    pub splines: SplineSettings,
    pub out: PathBuf,
    pub seed: u64,
    pub stratum: Option<String>,
    pub fit_start: Option<MonthKey>,
    pub fit_end: Option<MonthKey>,
    pub grid: LambdaGrid,
    pub periods: Option<Vec<Period>>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Reads a `key = value` file. Keys may use `-` or `_`.
fn read_config(path: &Path) -> Result<BTreeMap<String, toml::Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    Ok(table.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

struct Layered {
    file: BTreeMap<String, toml::Value>,
}

impl Layered {
    fn str(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(invalid(format!("config key {key}: expected a string, got {other}"))),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(invalid(format!("config key {key}: expected a number, got {other}"))),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(invalid(format!("config key {key}: expected a non-negative integer, got {other}"))),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(invalid(format!("config key {key}: {other} is not a number"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(other) => Err(invalid(format!("config key {key}: expected an array, got {other}"))),
        }
    }

    fn strings(&self, key: &str) -> Result<Option<Vec<String>>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    other => Err(invalid(format!("config key {key}: {other} is not a string"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(other) => Err(invalid(format!("config key {key}: expected an array, got {other}"))),
        }
    }
}

fn parse_month(s: &str, what: &str) -> Result<MonthKey, CliError> {
    s.parse().map_err(|e| invalid(format!("{what}: {e}")))
}

/// Parses `LABEL:YYYY-MM:YYYY-MM`.
pub fn parse_period(s: &str) -> Result<Period, CliError> {
    let mut parts = s.rsplitn(3, ':');
    let (end, start, label) = (parts.next(), parts.next(), parts.next());
    match (label, start, end) {
        (Some(label), Some(start), Some(end)) if !label.is_empty() => Ok(Period::new(
            label,
            parse_month(start, "period start")?,
            parse_month(end, "period end")?,
        )),
        _ => Err(invalid(format!("period {s:?} is not LABEL:YYYY-MM:YYYY-MM"))),
    }
}

impl RunConfig {
    /// Merges flags over the config file over defaults and validates the result.
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = Layered {
            file: match &args.config {
                Some(path) => read_config(path)?,
                None => BTreeMap::new(),
            },
        };
        let defaults = PenaltyConfig::default();
        let spline_defaults = SplineSettings::default();

        let deaths = args
            .deaths
            .clone()
            .or(file.str("deaths")?.map(PathBuf::from))
            .ok_or_else(|| invalid("--deaths is required"))?;
        let population = args.population.clone().or(file.str("population")?.map(PathBuf::from));
        let model_text = args.model.clone().or(file.str("model")?).unwrap_or_else(|| "stfs".into());
        let model: ModelKind = model_text.parse().map_err(invalid)?;
        let as_usize = |v: Option<u64>| v.map(|v| v as usize);

        let penalty = PenaltyConfig {
            lambda_trend: args.lambda_trend.or(file.float("lambda_trend")?).unwrap_or(defaults.lambda_trend),
            lambda_season: args.lambda_season.or(file.float("lambda_season")?).unwrap_or(defaults.lambda_season),
            order_trend: args.order_trend.or(as_usize(file.uint("order_trend")?)).unwrap_or(defaults.order_trend),
            order_season: args.order_season.or(as_usize(file.uint("order_season")?)).unwrap_or(defaults.order_season),
        };
        penalty.validate().map_err(|e| invalid(e.to_string()))?;
        let splines = SplineSettings {
            degree: args.degree.or(as_usize(file.uint("degree")?)).unwrap_or(spline_defaults.degree),
            segments_per_year: args
                .segments_per_year
                .or(as_usize(file.uint("segments_per_year")?))
                .unwrap_or(spline_defaults.segments_per_year),
        };
        if splines.degree < 1 || splines.segments_per_year < 1 {
            return Err(invalid("degree and segments-per-year must be at least 1"));
        }

        let window_years = args.window_years.or(as_usize(file.uint("window_years")?)).unwrap_or(10);
        if window_years < 2 {
            return Err(invalid("--window-years must be at least 2"));
        }
        let horizon = args.horizon.or(as_usize(file.uint("horizon")?)).unwrap_or(12);
        if horizon == 0 {
            return Err(invalid("--horizon must be positive"));
        }

        let month_setting = |flag: &Option<String>, key: &str| -> Result<Option<MonthKey>, CliError> {
            flag.clone()
                .or(file.str(key)?)
                .map(|s| parse_month(&s, key))
                .transpose()
        };
        let fit_start = month_setting(&args.fit_start, "fit_start")?;
        let fit_end = month_setting(&args.fit_end, "fit_end")?;
        if let (Some(a), Some(b)) = (fit_start, fit_end) {
            if b < a {
                return Err(invalid(format!("fit end {b} precedes fit start {a}")));
            }
        }

        let grid_default = LambdaGrid::default();
        let grid = LambdaGrid {
            trend: args.grid_trend.clone().or(file.floats("grid_trend")?).unwrap_or(grid_default.trend),
            season: args.grid_season.clone().or(file.floats("grid_season")?).unwrap_or(grid_default.season),
        };
        if grid.trend.is_empty() || grid.season.is_empty() {
            return Err(invalid("lambda grid axes must be non-empty"));
        }
        if grid.trend.iter().chain(&grid.season).any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("lambda grid values must be finite and >= 0"));
        }

        let period_specs = if args.periods.is_empty() {
            file.strings("periods")?
        } else {
            Some(args.periods.clone())
        };
        let periods = period_specs
            .map(|specs| specs.iter().map(|s| parse_period(s)).collect::<Result<Vec<_>, _>>())
            .transpose()?;

        Ok(RunConfig {
            deaths,
            population,
            model,
            window_years,
            horizon,
            penalty,
            splines,
            out: args.out.clone().or(file.str("out")?.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(".")),
            seed: args.seed.or(file.uint("seed")?).unwrap_or(0),
            stratum: args.stratum.clone().or(file.str("stratum")?),
            fit_start,
            fit_end,
            grid,
            periods,
        })
    }
}

/// Parses arguments and runs one command; returns the files written.
pub fn run<I, T>(args: I) -> Result<Vec<PathBuf>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| invalid(e.to_string()))?;
    run_command(&cli.command)
}

pub fn run_command(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Fit(a) => cmd_fit(&RunConfig::resolve(a)?),
        Command::Forecast(a) => cmd_forecast(&RunConfig::resolve(a)?),
        Command::Backtest(a) => cmd_backtest(&RunConfig::resolve(a)?),
        Command::GridSearch(a) => cmd_grid_search(&RunConfig::resolve(a)?),
        Command::Excess(a) => cmd_excess(&RunConfig::resolve(a)?),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> CommonArgs {
        let mut argv = vec!["mortcast", "fit", "--deaths", "d.csv"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Fit(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve(&args(&[])).unwrap();
        assert_eq!(cfg.model, ModelKind::SpStfs);
        assert_eq!(cfg.window_years, 10);
        assert_eq!(cfg.horizon, 12);
        assert_eq!(cfg.penalty, PenaltyConfig::default());
        assert_eq!(cfg.grid.pairs().len(), 49);
        assert!(cfg.periods.is_none());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "model = \"stss\"\nlambda-trend = 1e6\nhorizon = 24\nwindow_years = 5\nperiods = [\"w:2020-03:2020-06\"]\ngrid_trend = [1, 10]\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = RunConfig::resolve(&args(&["--config", p, "--horizon", "6"])).unwrap();
        assert_eq!(cfg.model, ModelKind::SpStss);
        assert_eq!(cfg.penalty.lambda_trend, 1e6);
        assert_eq!(cfg.horizon, 6);
        assert_eq!(cfg.window_years, 5);
        assert_eq!(cfg.grid.trend, vec![1.0, 10.0]);
        assert_eq!(cfg.periods.unwrap()[0].label, "w");
    }

    #[test]
    fn validation_errors() {
        for bad in [
            &["--model", "gam"][..],
            &["--order-trend", "5"],
            &["--lambda-trend", "-1"],
            &["--horizon", "0"],
            &["--window-years", "1"],
            &["--fit-start", "2020-05", "--fit-end", "2020-01"],
            &["--period", "2020-01:2020-02"],
        ] {
            let err = RunConfig::resolve(&args(bad)).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad:?}");
        }
    }

    #[test]
    fn period_syntax() {
        let p = parse_period("first wave:2020-03:2020-06").unwrap();
        assert_eq!(p.label, "first wave");
        assert_eq!(p.end, MonthKey::new(2020, 6).unwrap());
        assert!(parse_period(":2020-03:2020-06").is_err());
        assert!(parse_period("x:2020-3x:2020-06").is_err());
    }
}
