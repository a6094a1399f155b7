//! Excess mortality against a forecast baseline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastResult;
use crate::timeseries::{MonthKey, MonthlySeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Excess,
    Deficit,
    Within,
}

impl Flag {
    fn classify(value: f64, lower: f64, upper: f64) -> Self {
        if value > upper {
            Flag::Excess
        } else if value < lower {
            Flag::Deficit
        } else {
            Flag::Within
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Excess => "excess",
            Flag::Deficit => "deficit",
            Flag::Within => "within",
        })
    }
}

/// Inclusive range of months.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub label: String,
    pub start: MonthKey,
    pub end: MonthKey,
}

impl Period {
    pub fn new(label: impl Into<String>, start: MonthKey, end: MonthKey) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, month: MonthKey) -> bool {
        self.start <= month && month <= self.end
    }

    /// First COVID-19 wave, then the two epidemiological years July-June.
    pub fn pandemic_presets() -> Vec<Period> {
        let m = |y, mo| MonthKey::new(y, mo).expect("valid preset month");
        vec![
            Period::new("wave1_2020", m(2020, 3), m(2020, 6)),
            Period::new("year_2020_21", m(2020, 7), m(2021, 6)),
            Period::new("year_2021_22", m(2021, 7), m(2022, 6)),
        ]
    }
}

/// Rate-scale values for one month: count-scale values over exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub observed: f64,
    pub expected: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub month: MonthKey,
    pub observed: f64,
    pub expected: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub excess: f64,
    pub flag: Flag,
    pub rate: Option<RateRow>,
}

/// Summed excess over a period with bounds from summed monthly bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub label: String,
    pub start: MonthKey,
    pub end: MonthKey,
    pub observed: f64,
    pub expected: f64,
    pub excess: f64,
    /// `sum(observed) - sum(upper95)`.
    pub excess_lower95: f64,
    /// `sum(observed) - sum(lower95)`.
    pub excess_upper95: f64,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub stratum: String,
    pub months: Vec<MonthRow>,
    pub periods: Vec<PeriodRow>,
}

/// Compares observed deaths with the forecast on horizon months.
///
/// Every observed month must lie in the forecast horizon. Periods must not
/// overlap and must be fully covered by the observed months.
pub fn excess_report(observed: &MonthlySeries, forecast: &ForecastResult, periods: &[Period]) -> Result<ExcessReport> {
    let mut months = Vec::with_capacity(observed.len());
    for (i, &month) in observed.months().iter().enumerate() {
        let pos = forecast
            .position(month)
            .filter(|&p| p >= forecast.horizon_start)
            .ok_or(Error::MonthNotInHorizon(month))?;
        let obs = observed.deaths()[i] as f64;
        let (expected, lower, upper) = (forecast.expected[pos], forecast.lower95[pos], forecast.upper95[pos]);
        let rate = observed.exposure().map(|e| {
            let e = e[i];
            RateRow {
                observed: obs / e,
                expected: expected / e,
                lower95: lower / e,
                upper95: upper / e,
                excess: (obs - expected) / e,
            }
        });
        months.push(MonthRow {
            month,
            observed: obs,
            expected,
            lower95: lower,
            upper95: upper,
            excess: obs - expected,
            flag: Flag::classify(obs, lower, upper),
            rate,
        });
    }

    let mut sorted: Vec<&Period> = periods.iter().collect();
    sorted.sort_by_key(|p| p.start);
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::OverlappingPeriods(pair[0].label.clone(), pair[1].label.clone()));
        }
    }

    let period_rows = periods
        .iter()
        .map(|p| {
            if p.end < p.start {
                return Err(Error::InvalidPeriod {
                    label: p.label.clone(),
                    reason: format!("ends {} before it starts {}", p.end, p.start),
                });
            }
            let n = p.start.months_until(p.end) as usize + 1;
            let first = observed.position(p.start).ok_or(Error::MonthNotInHorizon(p.start))?;
            if observed.position(p.end).is_none() {
                return Err(Error::MonthNotInHorizon(p.end));
            }
            let rows = &months[first..first + n];
            let sum = |f: fn(&MonthRow) -> f64| rows.iter().map(f).sum::<f64>();
            let (obs, exp) = (sum(|r| r.observed), sum(|r| r.expected));
            let excess = sum(|r| r.excess);
            let lower = obs - sum(|r| r.upper95);
            let upper = obs - sum(|r| r.lower95);
            Ok(PeriodRow {
                label: p.label.clone(),
                start: p.start,
                end: p.end,
                observed: obs,
                expected: exp,
                excess,
                excess_lower95: lower,
                excess_upper95: upper,
                flag: Flag::classify(0.0, -upper, -lower),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExcessReport {
        stratum: observed.stratum().to_string(),
        months,
        periods: period_rows,
    })
}
