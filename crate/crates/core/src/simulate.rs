//! Seeded synthetic monthly death series for tests and demonstrations.
//!
//! Log-mean deaths follow `level + slope t + curvature t^2 + a_t cos(wt) +
//! b sin(wt)`, with the cosine amplitude `a_t` moving linearly from
//! `amplitude_start` to `amplitude_end`. An optional shock multiplies the
//! mean over a run of months. Counts are Poisson draws.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{derive_exposure, MonthKey, MonthlySeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub start: MonthKey,
    pub months: usize,
    /// Multiplier on the mean, e.g. 1.3 for +30%.
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub stratum: String,
    pub start: MonthKey,
    pub months: usize,
    /// Log of the expected deaths at t = 0.
    pub level: f64,
    pub slope: f64,
    pub curvature: f64,
    pub amplitude_start: f64,
    pub amplitude_end: f64,
    pub sine: f64,
    pub shock: Option<Shock>,
    /// Population on 1 January of the first year; attaches exposures when set.
    pub population: Option<f64>,
    /// Yearly relative population growth.
    pub population_growth: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            stratum: "SIM".into(),
            start: MonthKey::new(2010, 1).expect("valid month"),
            months: 120,
            level: 8.0,
            slope: -0.001,
            curvature: 0.0,
            amplitude_start: 0.1,
            amplitude_end: 0.1,
            sine: 0.03,
            shock: None,
            population: None,
            population_growth: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub series: MonthlySeries,
    /// Expected deaths per month, shock included.
    pub mean: Vec<f64>,
    /// Expected deaths without the shock.
    pub baseline: Vec<f64>,
    pub population: Option<BTreeMap<i32, f64>>,
}

impl SimulationSpec {
    /// Baseline log mean at 1-based month index `t`.
    pub fn log_mean(&self, t: usize) -> f64 {
        let tf = t as f64;
        let w = 2.0 * std::f64::consts::PI / 12.0;
        let frac = if self.months > 1 {
            (t - 1) as f64 / (self.months - 1) as f64
        } else {
            0.0
        };
        let amp = self.amplitude_start + (self.amplitude_end - self.amplitude_start) * frac;
        self.level + self.slope * tf + self.curvature * tf * tf + amp * (w * tf).cos() + self.sine * (w * tf).sin()
    }

    fn population_map(&self) -> Option<BTreeMap<i32, f64>> {
        let p0 = self.population?;
        let last = self.start.add_months(self.months as i64 - 1).year();
        Some(
            (self.start.year()..=last + 1)
                .map(|y| (y, (p0 * (1.0 + self.population_growth).powi(y - self.start.year())).round()))
                .collect(),
        )
    }
}

pub fn simulate(spec: &SimulationSpec, seed: u64) -> Result<Simulated> {
    if spec.months == 0 {
        return Err(Error::Empty("simulation with zero months".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline: Vec<f64> = (1..=spec.months).map(|t| spec.log_mean(t).exp()).collect();
    let mean: Vec<f64> = baseline
        .iter()
        .enumerate()
        .map(|(i, &m)| match spec.shock {
            Some(s) => {
                let offset = s.start.months_until(spec.start.add_months(i as i64));
                if offset >= 0 && (offset as usize) < s.months {
                    m * s.factor
                } else {
                    m
                }
            }
            None => m,
        })
        .collect();
    let deaths = mean
        .iter()
        .map(|&m| {
            let dist = Poisson::new(m).map_err(|e| Error::InvalidSeries(format!("Poisson mean {m}: {e}")))?;
            Ok(dist.sample(&mut rng) as u64)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series = MonthlySeries::new(spec.stratum.clone(), spec.start, deaths)?;
    let population = spec.population_map();
    if let Some(pop) = &population {
        series = derive_exposure(&series, pop)?;
    }
    Ok(Simulated {
        series,
        mean,
        baseline,
        population,
    })
}
