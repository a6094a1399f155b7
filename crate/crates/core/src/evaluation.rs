//! Model selection: BIC, forecast accuracy, rolling-window backtests, grid
//! search over the smoothing parameters and penalty-order comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{SplineSettings, MONTHS_PER_YEAR};
use crate::design::{build_design, ModelKind, PenaltyConfig, MIN_FIT_MONTHS};
use crate::error::{Error, Result};
use crate::forecast::forecast_with_exposure;
use crate::solver::{fit, FitResult};
use crate::timeseries::{window, MonthKey, MonthlySeries};

/// Rates are scored per 1000 person-months.
pub const RATE_SCALE: f64 = 1000.0;

/// Orders compared by [`penalty_order_tournament`], as (trend, season).
pub const ORDER_COMBINATIONS: [(usize, usize); 4] = [(1, 1), (2, 2), (1, 2), (2, 1)];

/// `2 Dev + log(n) ed`.
pub fn bic(fit: &FitResult, n: usize) -> f64 {
    2.0 * fit.deviance + (n as f64).ln() * fit.ed
}

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Empty("no test observations".into()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch(format!("{} observed vs {} predicted", y.len(), y_hat.len())));
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    if let Some(i) = y.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroObserved(i));
    }
    let total: f64 = y.iter().zip(y_hat).map(|(a, b)| (100.0 * (a - b) / a).abs()).sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub fit_start: MonthKey,
    pub fit_end: MonthKey,
    pub test_start: MonthKey,
    pub bic: Option<f64>,
    pub rmse: f64,
    pub mape: f64,
    /// Held-out values, rates x1000 when exposures are present.
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub stratum: String,
    pub kind: ModelKind,
    pub window_length: usize,
    pub penalty: PenaltyConfig,
    /// Whether scores are on the rate scale (x1000).
    pub rates: bool,
    pub windows: Vec<WindowRecord>,
    pub mean_bic: Option<f64>,
    pub mean_rmse: f64,
    pub mean_mape: f64,
}

/// Number of one-year-ahead windows that fit in `n_months`.
pub fn window_count(n_months: usize, window_years: usize) -> usize {
    let needed = (window_years + 1) * MONTHS_PER_YEAR;
    if n_months < needed {
        0
    } else {
        (n_months - needed) / MONTHS_PER_YEAR + 1
    }
}

fn score_window(
    series: &MonthlySeries,
    kind: ModelKind,
    fit_start: MonthKey,
    fit_months: usize,
    penalty: &PenaltyConfig,
    splines: SplineSettings,
    with_bic: bool,
) -> Result<WindowRecord> {
    let train = window(series, fit_start, fit_months)?;
    let test_start = fit_start.add_months(fit_months as i64);
    let test = window(series, test_start, MONTHS_PER_YEAR)?;

    let forecast = forecast_with_exposure(kind, &train, MONTHS_PER_YEAR, splines, penalty, test.exposure())?;
    let horizon = forecast.horizon_start..forecast.months.len();
    let (observed, predicted): (Vec<f64>, Vec<f64>) = match test.exposure() {
        Some(e) => (
            test.deaths().iter().zip(e).map(|(&d, e)| d as f64 / e * RATE_SCALE).collect(),
            forecast.expected[horizon].iter().zip(e).map(|(m, e)| m / e * RATE_SCALE).collect(),
        ),
        None => (test.deaths_f64(), forecast.expected[horizon].to_vec()),
    };

    let bic_value = if with_bic {
        let design = build_design(kind, fit_months, 0, splines, penalty, train.exposure())?;
        let fitted = fit(&design, &train.deaths_f64(), &design.weights())?;
        Some(bic(&fitted, fit_months))
    } else {
        None
    };

    Ok(WindowRecord {
        fit_start,
        fit_end: train.last_month(),
        test_start,
        bic: bic_value,
        rmse: rmse(&observed, &predicted)?,
        mape: mape(&observed, &predicted)?,
        observed,
        predicted,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn run_backtest(
    series: &MonthlySeries,
    kind: ModelKind,
    window_years: usize,
    penalty: &PenaltyConfig,
    splines: SplineSettings,
    with_bic: bool,
) -> Result<BacktestReport> {
    let fit_months = window_years * MONTHS_PER_YEAR;
    let n_windows = window_count(series.len(), window_years);
    if fit_months < MIN_FIT_MONTHS || n_windows == 0 {
        return Err(Error::ShortSeries {
            len: series.len(),
            min: fit_months.max(MIN_FIT_MONTHS) + MONTHS_PER_YEAR,
        });
    }
    let first = series.first_month();
    let windows = (0..n_windows)
        .into_par_iter()
        .map(|w| {
            let start = first.add_months((w * MONTHS_PER_YEAR) as i64);
            score_window(series, kind, start, fit_months, penalty, splines, with_bic)
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_bic = with_bic.then(|| mean(windows.iter().filter_map(|w| w.bic)));
    Ok(BacktestReport {
        stratum: series.stratum().to_string(),
        kind,
        window_length: fit_months,
        penalty: *penalty,
        rates: series.exposure().is_some(),
        mean_bic,
        mean_rmse: mean(windows.iter().map(|w| w.rmse)),
        mean_mape: mean(windows.iter().map(|w| w.mape)),
        windows,
    })
}

/// Fits every `window_years` window stepping by one year and scores the
/// following 12 months. Windows run in parallel; the report order is fixed.
pub fn backtest(
    series: &MonthlySeries,
    kind: ModelKind,
    window_years: usize,
    penalty: &PenaltyConfig,
    splines: SplineSettings,
) -> Result<BacktestReport> {
    run_backtest(series, kind, window_years, penalty, splines, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub trend: Vec<f64>,
    pub season: Vec<f64>,
}

impl Default for LambdaGrid {
    /// Half-decade steps from 1e4 to 1e7 on both axes.
    fn default() -> Self {
        let axis: Vec<f64> = (0..7).map(|k| 10f64.powf(4.0 + 0.5 * k as f64)).collect();
        Self {
            trend: axis.clone(),
            season: axis,
        }
    }
}

impl LambdaGrid {
    pub fn single(lambda_trend: f64, lambda_season: f64) -> Self {
        Self {
            trend: vec![lambda_trend],
            season: vec![lambda_season],
        }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.trend
            .iter()
            .flat_map(|&a| self.season.iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda_trend: f64,
    pub lambda_season: f64,
    pub mean_rmse: f64,
    pub mean_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub kind: ModelKind,
    pub window_length: usize,
    pub points: Vec<GridPoint>,
    pub chosen: GridPoint,
}

/// Minimum mean MAPE; ties go to the larger trend, then season, smoothing.
fn choose(points: &[GridPoint]) -> GridPoint {
    let mut best = points[0];
    for p in &points[1..] {
        let better = p.mean_mape < best.mean_mape
            || (p.mean_mape == best.mean_mape
                && (p.lambda_trend, p.lambda_season) > (best.lambda_trend, best.lambda_season));
        if better {
            best = *p;
        }
    }
    best
}

/// Scores every `(lambda_trend, lambda_season)` pair by backtest mean MAPE.
pub fn grid_search(
    series: &MonthlySeries,
    kind: ModelKind,
    window_years: usize,
    grid: &LambdaGrid,
    orders: (usize, usize),
    splines: SplineSettings,
) -> Result<GridSearchResult> {
    let pairs = grid.pairs();
    if pairs.is_empty() {
        return Err(Error::Empty("lambda grid".into()));
    }
    let base = PenaltyConfig::default().with_orders(orders.0, orders.1);
    // pairs that build the same penalty give the same fit
    let effective = |(a, b): (f64, f64)| match kind {
        ModelKind::Sp => (0.0, 0.0),
        ModelKind::SpStfs => (a, 0.0),
        ModelKind::SpStss => (a, b),
    };
    let mut distinct: Vec<(f64, f64)> = pairs.iter().map(|&p| effective(p)).collect();
    distinct.sort_by(|x, y| x.partial_cmp(y).expect("finite lambdas"));
    distinct.dedup();

    let scored = distinct
        .par_iter()
        .map(|&(a, b)| {
            let report = run_backtest(series, kind, window_years, &base.with_lambdas(a, b), splines, false)?;
            Ok(((a, b), (report.mean_rmse, report.mean_mape)))
        })
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<GridPoint> = pairs
        .iter()
        .map(|&(a, b)| {
            let key = effective((a, b));
            let (_, (mean_rmse, mean_mape)) = scored.iter().find(|(k, _)| *k == key).expect("every pair scored");
            GridPoint {
                lambda_trend: a,
                lambda_season: b,
                mean_rmse: *mean_rmse,
                mean_mape: *mean_mape,
            }
        })
        .collect();
    Ok(GridSearchResult {
        kind,
        window_length: window_years * MONTHS_PER_YEAR,
        chosen: choose(&points),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub order_trend: usize,
    pub order_season: usize,
    pub mean_rmse: f64,
    pub mean_mape: f64,
}

/// Backtests the four (trend, season) order combinations at fixed smoothing
/// parameters; rows come back ranked by mean MAPE.
pub fn penalty_order_tournament(
    series: &MonthlySeries,
    kind: ModelKind,
    window_years: usize,
    lambdas: (f64, f64),
    splines: SplineSettings,
) -> Result<Vec<OrderScore>> {
    let mut rows = ORDER_COMBINATIONS
        .par_iter()
        .map(|&(ot, os)| {
            let penalty = PenaltyConfig::default().with_lambdas(lambdas.0, lambdas.1).with_orders(ot, os);
            let report = run_backtest(series, kind, window_years, &penalty, splines, false)?;
            Ok(OrderScore {
                order_trend: ot,
                order_season: os,
                mean_rmse: report.mean_rmse,
                mean_mape: report.mean_mape,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.mean_mape.total_cmp(&b.mean_mape));
    Ok(rows)
}
