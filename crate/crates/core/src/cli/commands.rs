use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::output::{file_stem, opt6, sig6, OutputDir, PlotData, Table};
use super::{CliError, RunConfig, SimulateArgs};
use crate::basis::MONTHS_PER_YEAR;
use crate::design::{build_design, ModelKind, PenaltyConfig};
use crate::evaluation::{backtest, bic, grid_search, BacktestReport, GridSearchResult};
use crate::excess::{excess_report, Period};
use crate::forecast::{forecast_with_exposure, ForecastResult, RECOMMENDED_MAX_HORIZON};
use crate::simulate::{simulate, Shock, SimulationSpec};
use crate::solver::fit;
use crate::timeseries::{
    derive_exposure, parse_monthly_deaths, parse_population, serialize_deaths, serialize_population, window,
    MonthKey, MonthlySeries,
};

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Reads the deaths file, keeps the requested stratum and attaches exposures.
fn load(cfg: &RunConfig) -> Result<Vec<MonthlySeries>, CliError> {
    let mut series = parse_monthly_deaths(&read(&cfg.deaths)?)?;
    if let Some(wanted) = &cfg.stratum {
        series.retain(|s| s.stratum() == wanted);
        if series.is_empty() {
            return Err(CliError::Validation(format!("stratum {wanted} not found in {}", cfg.deaths.display())));
        }
    }
    if series.is_empty() {
        return Err(CliError::Validation(format!("{} has no data rows", cfg.deaths.display())));
    }
    let Some(pop_path) = &cfg.population else {
        return Ok(series);
    };
    let population = parse_population(&read(pop_path)?)?;
    series
        .into_iter()
        .map(|s| {
            let years = population.get(s.stratum()).ok_or_else(|| {
                CliError::Validation(format!("{}: no population rows in {}", s.stratum(), pop_path.display()))
            })?;
            derive_exposure(&s, years).map_err(|e| CliError::in_stratum(s.stratum(), e))
        })
        .collect()
}

/// The fitting window: `window_years` years ending at `end`, or from the
/// configured start when one is given.
fn fit_window(series: &MonthlySeries, cfg: &RunConfig, end: MonthKey) -> Result<MonthlySeries, CliError> {
    let stratum = series.stratum();
    if end > series.last_month() || end < series.first_month() {
        return Err(CliError::Validation(format!(
            "{stratum}: fit end {end} outside the data {}..{}",
            series.first_month(),
            series.last_month()
        )));
    }
    let start = match cfg.fit_start {
        Some(start) => start,
        None => {
            let wanted = end.add_months(1 - (cfg.window_years * MONTHS_PER_YEAR) as i64);
            if wanted < series.first_month() {
                log::warn!(
                    "{stratum}: only {} months before {end}; fitting from {}",
                    series.first_month().months_until(end) + 1,
                    series.first_month()
                );
                series.first_month()
            } else {
                wanted
            }
        }
    };
    let n = start.months_until(end) + 1;
    if n <= 0 {
        return Err(CliError::Validation(format!("{stratum}: fit start {start} after fit end {end}")));
    }
    window(series, start, n as usize).map_err(|e| CliError::in_stratum(stratum, e))
}

/// Exposures for `horizon` months after `end`, when the data has them.
fn known_future_exposure(series: &MonthlySeries, end: MonthKey, horizon: usize) -> Option<Vec<f64>> {
    let e = series.exposure()?;
    let from = series.position(end)? + 1;
    (from + horizon <= series.len()).then(|| e[from..from + horizon].to_vec())
}

fn run_forecast(
    cfg: &RunConfig,
    series: &MonthlySeries,
    train: &MonthlySeries,
    horizon: usize,
) -> Result<ForecastResult, CliError> {
    if horizon > RECOMMENDED_MAX_HORIZON {
        log::warn!(
            "{}: horizon of {horizon} months exceeds {RECOMMENDED_MAX_HORIZON}; intervals will be wide",
            series.stratum()
        );
    }
    let future = known_future_exposure(series, train.last_month(), horizon);
    let result = forecast_with_exposure(cfg.model, train, horizon, cfg.splines, &cfg.penalty, future.as_deref())
        .map_err(|e| CliError::in_stratum(series.stratum(), e))?;
    result
        .fit
        .require_converged()
        .map_err(|e| CliError::in_stratum(series.stratum(), e))?;
    Ok(result)
}

#[derive(Serialize)]
struct RunInfo<'a> {
    stratum: &'a str,
    model: ModelKind,
    fit_start: MonthKey,
    fit_end: MonthKey,
    n_fit: usize,
    penalty: PenaltyConfig,
    degree: usize,
    segments_per_year: usize,
}

impl<'a> RunInfo<'a> {
    fn new(cfg: &RunConfig, train: &'a MonthlySeries) -> Self {
        Self {
            stratum: train.stratum(),
            model: cfg.model,
            fit_start: train.first_month(),
            fit_end: train.last_month(),
            n_fit: train.len(),
            penalty: cfg.penalty,
            degree: cfg.splines.degree,
            segments_per_year: cfg.splines.segments_per_year,
        }
    }
}

#[derive(Serialize)]
struct FitSummary<'a> {
    #[serde(flatten)]
    run: RunInfo<'a>,
    theta: Vec<f64>,
    deviance: f64,
    penalized_deviance: f64,
    ed: f64,
    bic: f64,
    iterations: usize,
    converged: bool,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    for series in load(cfg)? {
        let stratum = series.stratum();
        let train = fit_window(&series, cfg, cfg.fit_end.unwrap_or(series.last_month()))?;
        let design = build_design(cfg.model, train.len(), 0, cfg.splines, &cfg.penalty, train.exposure())
            .map_err(|e| CliError::in_stratum(stratum, e))?;
        let y = train.deaths_f64();
        let fitted = fit(&design, &y, &design.weights()).map_err(|e| CliError::in_stratum(stratum, e))?;
        fitted.require_converged().map_err(|e| CliError::in_stratum(stratum, e))?;
        let trend: Vec<f64> = (design.trend_predictor(&fitted.theta) + &design.offset)
            .iter()
            .map(|v| v.exp())
            .collect();
        let mu: Vec<f64> = fitted.mu.iter().copied().collect();

        let mut t = Table::new(["month", "observed", "fitted", "trend_component"]);
        for i in 0..train.len() {
            t.row([train.months()[i].to_string(), sig6(y[i]), sig6(mu[i]), sig6(trend[i])]);
        }
        let stem = file_stem(stratum);
        out.write(&format!("fit_{stem}.csv"), &t.finish())?;
        out.write_json(
            &format!("fit_{stem}.json"),
            &FitSummary {
                run: RunInfo::new(cfg, &train),
                theta: fitted.theta.iter().copied().collect(),
                deviance: fitted.deviance,
                penalized_deviance: fitted.penalized_deviance,
                ed: fitted.ed,
                bic: bic(&fitted, train.len()),
                iterations: fitted.iterations,
                converged: fitted.converged,
            },
        )?;

        let mut plot = PlotData::default();
        plot.series("observed", train.months(), &y);
        plot.series("fitted", train.months(), &mu);
        plot.series("trend", train.months(), &trend);
        out.write(&format!("plotdata_fit_{stem}.csv"), &plot.finish())?;
    }
    Ok(out.into_written())
}

#[derive(Serialize)]
struct ForecastRow {
    month: MonthKey,
    part: &'static str,
    observed: Option<f64>,
    expected: f64,
    lower95: f64,
    upper95: f64,
    se_log: f64,
    trend: f64,
}

#[derive(Serialize)]
struct ForecastSummary<'a> {
    #[serde(flatten)]
    run: RunInfo<'a>,
    horizon: usize,
    deviance: f64,
    ed: f64,
    iterations: usize,
    rows: Vec<ForecastRow>,
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    for series in load(cfg)? {
        let train = fit_window(&series, cfg, cfg.fit_end.unwrap_or(series.last_month()))?;
        let f = run_forecast(cfg, &series, &train, cfg.horizon)?;
        let rows: Vec<ForecastRow> = (0..f.months.len())
            .map(|i| {
                let month = f.months[i];
                let in_fit = i < f.horizon_start;
                let observed = if in_fit {
                    Some(f.observed[i])
                } else {
                    series.position(month).map(|p| series.deaths()[p] as f64)
                };
                ForecastRow {
                    month,
                    part: if in_fit { "fit" } else { "forecast" },
                    observed,
                    expected: f.expected[i],
                    lower95: f.lower95[i],
                    upper95: f.upper95[i],
                    se_log: f.se_eta[i],
                    trend: f.trend[i],
                }
            })
            .collect();

        let mut t = Table::new(["month", "part", "observed", "expected", "lower95", "upper95", "se_log", "trend"]);
        for r in &rows {
            t.row([
                r.month.to_string(),
                r.part.to_string(),
                opt6(r.observed),
                sig6(r.expected),
                sig6(r.lower95),
                sig6(r.upper95),
                sig6(r.se_log),
                sig6(r.trend),
            ]);
        }
        let stem = file_stem(series.stratum());
        out.write(&format!("forecast_{stem}.csv"), &t.finish())?;

        let mut plot = PlotData::default();
        plot.series("observed", train.months(), &f.observed);
        for (name, values) in [
            ("expected", &f.expected),
            ("lower95", &f.lower95),
            ("upper95", &f.upper95),
            ("trend", &f.trend),
        ] {
            plot.series(name, &f.months, values);
        }
        out.write(&format!("plotdata_forecast_{stem}.csv"), &plot.finish())?;

        out.write_json(
            &format!("forecast_{stem}.json"),
            &ForecastSummary {
                run: RunInfo::new(cfg, &train),
                horizon: f.horizon(),
                deviance: f.fit.deviance,
                ed: f.fit.ed,
                iterations: f.fit.iterations,
                rows,
            },
        )?;
    }
    Ok(out.into_written())
}

/// The series restricted to the configured fit start and end, if any.
fn clipped(series: &MonthlySeries, cfg: &RunConfig) -> Result<MonthlySeries, CliError> {
    let start = cfg.fit_start.unwrap_or(series.first_month()).max(series.first_month());
    let end = cfg.fit_end.unwrap_or(series.last_month()).min(series.last_month());
    let n = start.months_until(end) + 1;
    if n <= 0 {
        return Err(CliError::Validation(format!("{}: no months between {start} and {end}", series.stratum())));
    }
    window(series, start, n as usize).map_err(|e| CliError::in_stratum(series.stratum(), e))
}

fn backtest_plot(report: &BacktestReport) -> String {
    let mut plot = PlotData::default();
    for (k, w) in report.windows.iter().enumerate() {
        let months: Vec<MonthKey> = (0..w.observed.len() as i64).map(|i| w.test_start.add_months(i)).collect();
        plot.series(&format!("observed_w{}", k + 1), &months, &w.observed);
        plot.series(&format!("predicted_w{}", k + 1), &months, &w.predicted);
    }
    plot.finish()
}

pub fn cmd_backtest(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    for series in load(cfg)? {
        let series = clipped(&series, cfg)?;
        let report = backtest(&series, cfg.model, cfg.window_years, &cfg.penalty, cfg.splines)
            .map_err(|e| CliError::in_stratum(series.stratum(), e))?;

        let mut t = Table::new(["window", "fit_start", "fit_end", "test_start", "bic", "rmse", "mape"]);
        for (k, w) in report.windows.iter().enumerate() {
            t.row([
                (k + 1).to_string(),
                w.fit_start.to_string(),
                w.fit_end.to_string(),
                w.test_start.to_string(),
                opt6(w.bic),
                sig6(w.rmse),
                sig6(w.mape),
            ]);
        }
        t.row([
            "mean".to_string(),
            String::new(),
            String::new(),
            String::new(),
            opt6(report.mean_bic),
            sig6(report.mean_rmse),
            sig6(report.mean_mape),
        ]);
        let stem = file_stem(series.stratum());
        out.write(&format!("backtest_{stem}.csv"), &t.finish())?;
        out.write_json(&format!("backtest_{stem}.json"), &report)?;
        out.write(&format!("plotdata_backtest_{stem}.csv"), &backtest_plot(&report))?;
    }
    Ok(out.into_written())
}

#[derive(Serialize)]
struct GridSummary<'a> {
    stratum: &'a str,
    order_trend: usize,
    order_season: usize,
    #[serde(flatten)]
    result: &'a GridSearchResult,
}

pub fn cmd_grid_search(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    let orders = (cfg.penalty.order_trend, cfg.penalty.order_season);
    for series in load(cfg)? {
        let series = clipped(&series, cfg)?;
        let stratum = series.stratum();
        let result = grid_search(&series, cfg.model, cfg.window_years, &cfg.grid, orders, cfg.splines)
            .map_err(|e| CliError::in_stratum(stratum, e))?;
        log::info!(
            "{stratum}: chose lambda_trend={} lambda_season={} (mean MAPE {:.4})",
            result.chosen.lambda_trend,
            result.chosen.lambda_season,
            result.chosen.mean_mape
        );

        let mut t = Table::new(["lambda_trend", "lambda_season", "mean_rmse", "mean_mape", "chosen"]);
        for p in &result.points {
            let chosen = p.lambda_trend == result.chosen.lambda_trend && p.lambda_season == result.chosen.lambda_season;
            t.row([
                sig6(p.lambda_trend),
                sig6(p.lambda_season),
                sig6(p.mean_rmse),
                sig6(p.mean_mape),
                chosen.to_string(),
            ]);
        }
        let stem = file_stem(stratum);
        out.write(&format!("grid_{stem}.csv"), &t.finish())?;
        out.write_json(
            &format!("grid_{stem}.json"),
            &GridSummary {
                stratum,
                order_trend: orders.0,
                order_season: orders.1,
                result: &result,
            },
        )?;

        let best = cfg.penalty.with_lambdas(result.chosen.lambda_trend, result.chosen.lambda_season);
        let report = backtest(&series, cfg.model, cfg.window_years, &best, cfg.splines)
            .map_err(|e| CliError::in_stratum(stratum, e))?;
        out.write(&format!("plotdata_grid-search_{stem}.csv"), &backtest_plot(&report))?;
    }
    Ok(out.into_written())
}

/// Periods to report for a series. Preset periods outside the data are
/// dropped; explicit periods are kept and checked later.
fn periods_for(cfg: &RunConfig, series: &MonthlySeries) -> Vec<Period> {
    match &cfg.periods {
        Some(p) => p.clone(),
        None => Period::pandemic_presets()
            .into_iter()
            .filter(|p| {
                let covered = p.start >= series.first_month() && p.end <= series.last_month();
                if !covered {
                    log::warn!("{}: preset period {} not covered by the data; skipped", series.stratum(), p.label);
                }
                covered
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct ExcessSummary<'a> {
    #[serde(flatten)]
    run: RunInfo<'a>,
    report: &'a crate::excess::ExcessReport,
}

pub fn cmd_excess(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    for series in load(cfg)? {
        let stratum = series.stratum();
        let periods = periods_for(cfg, &series);
        let fit_end = match (cfg.fit_end, periods.iter().map(|p| p.start).min()) {
            (Some(end), _) => end,
            (None, Some(first)) => first.add_months(-1),
            (None, None) => series.last_month().add_months(-(cfg.horizon as i64)),
        };
        let train = fit_window(&series, cfg, fit_end)?;
        let horizon = fit_end.months_until(series.last_month());
        if horizon <= 0 {
            return Err(CliError::Validation(format!("{stratum}: no observed months after the fit end {fit_end}")));
        }
        let horizon = horizon as usize;
        let f = run_forecast(cfg, &series, &train, horizon)?;
        let observed = window(&series, fit_end.add_months(1), horizon).map_err(|e| CliError::in_stratum(stratum, e))?;
        let report = excess_report(&observed, &f, &periods).map_err(|e| CliError::in_stratum(stratum, e))?;

        let rates = observed.exposure().is_some();
        let mut header = vec!["month", "observed", "expected", "lower95", "upper95", "excess", "flag"];
        if rates {
            header.extend(["observed_rate", "expected_rate", "lower95_rate", "upper95_rate", "excess_rate"]);
        }
        let mut t = Table::new(header);
        for r in &report.months {
            let mut row = vec![
                r.month.to_string(),
                sig6(r.observed),
                sig6(r.expected),
                sig6(r.lower95),
                sig6(r.upper95),
                sig6(r.excess),
                r.flag.to_string(),
            ];
            if let Some(rate) = r.rate {
                row.extend([rate.observed, rate.expected, rate.lower95, rate.upper95, rate.excess].map(sig6));
            }
            t.row(row);
        }
        let stem = file_stem(stratum);
        out.write(&format!("excess_{stem}.csv"), &t.finish())?;

        let mut t = Table::new([
            "label",
            "start",
            "end",
            "observed",
            "expected",
            "excess",
            "excess_lower95",
            "excess_upper95",
            "flag",
        ]);
        for p in &report.periods {
            t.row([
                p.label.clone(),
                p.start.to_string(),
                p.end.to_string(),
                sig6(p.observed),
                sig6(p.expected),
                sig6(p.excess),
                sig6(p.excess_lower95),
                sig6(p.excess_upper95),
                p.flag.to_string(),
            ]);
        }
        out.write(&format!("excess_periods_{stem}.csv"), &t.finish())?;
        out.write_json(
            &format!("excess_{stem}.json"),
            &ExcessSummary {
                run: RunInfo::new(cfg, &train),
                report: &report,
            },
        )?;

        let months: Vec<MonthKey> = report.months.iter().map(|r| r.month).collect();
        let column = |f: fn(&crate::excess::MonthRow) -> f64| report.months.iter().map(f).collect::<Vec<_>>();
        let mut plot = PlotData::default();
        plot.series("observed", train.months(), &train.deaths_f64());
        plot.series("fitted", train.months(), &f.expected[..f.horizon_start]);
        plot.series("observed", &months, &column(|r| r.observed));
        plot.series("expected", &months, &column(|r| r.expected));
        plot.series("lower95", &months, &column(|r| r.lower95));
        plot.series("upper95", &months, &column(|r| r.upper95));
        plot.series("excess", &months, &column(|r| r.excess));
        out.write(&format!("plotdata_excess_{stem}.csv"), &plot.finish())?;
    }
    Ok(out.into_written())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let month = |s: &str| s.parse::<MonthKey>().map_err(CliError::Validation);
    if args.months == 0 {
        return Err(CliError::Validation("--months must be positive".into()));
    }
    if args.population.is_some_and(|p| !(p.is_finite() && p > 0.0)) {
        return Err(CliError::Validation("--population must be positive".into()));
    }
    let shock = args
        .shock_start
        .as_deref()
        .map(|s| {
            Ok::<_, CliError>(Shock {
                start: month(s)?,
                months: args.shock_months,
                factor: args.shock_factor,
            })
        })
        .transpose()?;
    let spec = SimulationSpec {
        stratum: args.stratum.clone(),
        start: month(&args.start)?,
        months: args.months,
        level: args.level,
        slope: args.slope,
        curvature: args.curvature,
        amplitude_start: args.amplitude,
        amplitude_end: args.amplitude_end.unwrap_or(args.amplitude),
        sine: args.sine,
        shock,
        population: args.population,
        population_growth: args.population_growth,
    };
    let sim = simulate(&spec, args.seed)?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("deaths.csv", &serialize_deaths(std::slice::from_ref(&sim.series)))?;
    if let Some(pop) = &sim.population {
        let map = BTreeMap::from([(spec.stratum.clone(), pop.clone())]);
        out.write("population.csv", &serialize_population(&map))?;
    }
    let mut t = Table::new(["month", "mean", "baseline", "deaths"]);
    for (i, m) in sim.series.months().iter().enumerate() {
        t.row([m.to_string(), sig6(sim.mean[i]), sig6(sim.baseline[i]), sim.series.deaths()[i].to_string()]);
    }
    out.write("truth.csv", &t.finish())?;
    Ok(out.into_written())
}
