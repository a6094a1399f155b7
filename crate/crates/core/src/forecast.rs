//! Baseline forecasts as a missing-value fit, and the seasonal decomposition
//! of modulation-model fits.
//!
//! Forecast months are appended to the design with zero weight; the penalty
//! alone determines their coefficients. Intervals are delta-method bounds for
//! the mean, `exp(eta +/- z se(eta))`, with `se(eta)^2` the diagonal of
//! `X+ (X+' V M X+ + P+)^-1 X+'`. Poisson sampling noise is not added.

use nalgebra::DVector;

use crate::basis::{harmonics, SplineSettings, MONTHS_PER_YEAR};
use crate::design::{build_design, extend_exposure, DesignBundle, ModelKind, PenaltyConfig};
use crate::error::{Error, Result};
use crate::solver::{fit, FitResult};
use crate::timeseries::{MonthKey, MonthlySeries};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// Horizons beyond this many months are outside the method's intended use.
pub const RECOMMENDED_MAX_HORIZON: usize = 36;

#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub kind: ModelKind,
    pub stratum: String,
    /// Fit months followed by horizon months.
    pub months: Vec<MonthKey>,
    /// Deaths on the fit months.
    pub observed: Vec<f64>,
    /// Expected deaths.
    pub expected: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    /// Standard error of the linear predictor.
    pub se_eta: Vec<f64>,
    /// Expected deaths from the trend component alone.
    pub trend: Vec<f64>,
    /// Exposures used on every month, extended into the horizon.
    pub exposure: Option<Vec<f64>>,
    /// 0-based index of the first horizon month (equals the fit length).
    pub horizon_start: usize,
    pub fit: FitResult,
    pub design: DesignBundle,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.months.len() - self.horizon_start
    }

    fn per_exposure(&self, values: &[f64]) -> Option<Vec<f64>> {
        self.exposure
            .as_ref()
            .map(|e| values.iter().zip(e).map(|(v, e)| v / e).collect())
    }

    pub fn expected_rate(&self) -> Option<Vec<f64>> {
        self.per_exposure(&self.expected)
    }

    pub fn lower95_rate(&self) -> Option<Vec<f64>> {
        self.per_exposure(&self.lower95)
    }

    pub fn upper95_rate(&self) -> Option<Vec<f64>> {
        self.per_exposure(&self.upper95)
    }

    /// Position of `month` within `months`.
    pub fn position(&self, month: MonthKey) -> Option<usize> {
        let offset = self.months[0].months_until(month);
        (offset >= 0 && (offset as usize) < self.months.len()).then_some(offset as usize)
    }

    /// Whether `se_eta` never shrinks across the horizon.
    pub fn intervals_widen(&self) -> bool {
        self.se_eta[self.horizon_start.saturating_sub(1)..]
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12)
    }
}

/// Forecasts `horizon` months past the end of `series`. Future exposures, when
/// the series has exposures, are held at the trailing 12-month mean.
pub fn forecast(
    kind: ModelKind,
    series: &MonthlySeries,
    horizon: usize,
    splines: SplineSettings,
    penalty: &PenaltyConfig,
) -> Result<ForecastResult> {
    forecast_with_exposure(kind, series, horizon, splines, penalty, None)
}

/// As [`forecast`], with known exposures for the horizon months.
pub fn forecast_with_exposure(
    kind: ModelKind,
    series: &MonthlySeries,
    horizon: usize,
    splines: SplineSettings,
    penalty: &PenaltyConfig,
    future_exposure: Option<&[f64]>,
) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::Empty("forecast horizon is zero".into()));
    }
    let n_obs = series.len();
    let exposure = match (series.exposure(), future_exposure) {
        (Some(e), Some(future)) => {
            if future.len() != horizon {
                return Err(Error::ExposureLengthMismatch {
                    got: future.len(),
                    expected: horizon,
                });
            }
            Some([e, future].concat())
        }
        (Some(e), None) => Some(extend_exposure(e, horizon)?),
        (None, _) => None,
    };
    let design = build_design(kind, n_obs, horizon, splines, penalty, exposure.as_deref())?;
    let y = series.deaths_f64();
    let fitted = fit(&design, &y, &design.weights())?;
    if !fitted.converged {
        log::warn!("{}: {kind} fit did not converge", series.stratum());
    }

    let se_eta: Vec<f64> = fitted
        .predictor_variance(&design.x)
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    let eta = &fitted.eta;
    let expected: Vec<f64> = fitted.mu.iter().copied().collect();
    let lower95 = (0..eta.len()).map(|i| (eta[i] - Z_95 * se_eta[i]).exp()).collect();
    let upper95 = (0..eta.len()).map(|i| (eta[i] + Z_95 * se_eta[i]).exp()).collect();
    let trend = (design.trend_predictor(&fitted.theta) + &design.offset)
        .map(f64::exp)
        .iter()
        .copied()
        .collect();
    let start = series.first_month();

    Ok(ForecastResult {
        kind,
        stratum: series.stratum().to_string(),
        months: (0..(n_obs + horizon) as i64).map(|i| start.add_months(i)).collect(),
        observed: y,
        expected,
        lower95,
        upper95,
        se_eta,
        trend,
        exposure,
        horizon_start: n_obs,
        fit: fitted,
        design,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalDecomposition {
    /// `y / exp(offset + B alpha)`.
    pub detrended: Vec<f64>,
    /// Local cosine amplitude `f = B beta`.
    pub cos_amplitude: Vec<f64>,
    /// Local sine amplitude `g = B gamma`.
    pub sin_amplitude: Vec<f64>,
    /// `f cos(wt) + g sin(wt)`.
    pub modulation: Vec<f64>,
    /// `sqrt(f^2 + g^2)`.
    pub amplitude: Vec<f64>,
}

/// Splits a modulation-model fit into trend ratio, seasonal wave and its
/// envelope over the observed months.
pub fn seasonal_decomposition(fit: &FitResult, design: &DesignBundle, y: &[f64]) -> Result<SeasonalDecomposition> {
    if design.kind != ModelKind::SpStss {
        return Err(Error::WrongModelKind {
            expected: ModelKind::SpStss.to_string(),
            got: design.kind.to_string(),
        });
    }
    let n = design.n_observed;
    if y.len() != n || fit.theta.len() != design.n_coef() {
        return Err(Error::LengthMismatch("fit, design and observations disagree".into()));
    }
    let basis = design.basis.as_ref().expect("smooth designs carry a basis");
    let b = basis.values.rows(0, n);
    let layout = &design.layout;
    let block = |r: &std::ops::Range<usize>| -> DVector<f64> { b * fit.theta.rows(r.start, r.len()) };
    let trend = block(&layout.trend);
    let f = block(&layout.cos);
    let g = block(&layout.sin);
    let h = harmonics(n, MONTHS_PER_YEAR as f64);

    Ok(SeasonalDecomposition {
        detrended: (0..n).map(|t| y[t] / (trend[t] + design.offset[t]).exp()).collect(),
        modulation: (0..n).map(|t| f[t] * h.cos[t] + g[t] * h.sin[t]).collect(),
        amplitude: (0..n).map(|t| f[t].hypot(g[t])).collect(),
        cos_amplitude: f.iter().copied().collect(),
        sin_amplitude: g.iter().copied().collect(),
    })
}
