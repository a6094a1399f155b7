//! Regression and penalty matrices for the three Serfling-Poisson variants.
//!
//! | kind       | columns            | penalty                                          |
//! |------------|--------------------|--------------------------------------------------|
//! | `Sp`       | `1, t, cos, sin`   | none                                             |
//! | `SpStss`   | `B, CB, SB`        | `blockdiag(l1 D1'D1, l2 D2'D2, l2 D2'D2)`        |
//! | `SpStfs`   | `B, c, s`          | `blockdiag(l1 D1'D1, 0, 0)`                      |
//!
//! Every design covers `n1 + n2` months; the last `n2` rows are forecast rows
//! that receive zero weight in the fit.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{harmonics, make_basis, make_difference, BasisMatrix, SplineSettings, MONTHS_PER_YEAR};
use crate::error::{Error, Result};

pub const MIN_FIT_MONTHS: usize = 2 * MONTHS_PER_YEAR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Linear trend, fixed harmonic.
    #[serde(rename = "SP")]
    Sp,
    /// Smooth trend, smoothly modulated harmonic.
    #[serde(rename = "SP-STSS")]
    SpStss,
    /// Smooth trend, fixed harmonic.
    #[serde(rename = "SP-STFS")]
    SpStfs,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Sp, ModelKind::SpStss, ModelKind::SpStfs];

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Sp => "sp",
            ModelKind::SpStss => "stss",
            ModelKind::SpStfs => "stfs",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Sp => "SP",
            ModelKind::SpStss => "SP-STSS",
            ModelKind::SpStfs => "SP-STFS",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(ModelKind::Sp),
            "stss" | "sp-stss" | "sp_stss" => Ok(ModelKind::SpStss),
            "stfs" | "sp-stfs" | "sp_stfs" => Ok(ModelKind::SpStfs),
            other => Err(format!("unknown model {other:?} (expected sp, stss or stfs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda_trend: f64,
    pub lambda_season: f64,
    pub order_trend: usize,
    pub order_season: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda_trend: 1e5,
            lambda_season: 1e5,
            order_trend: 2,
            order_season: 1,
        }
    }
}

impl PenaltyConfig {
    pub fn with_lambdas(self, lambda_trend: f64, lambda_season: f64) -> Self {
        Self {
            lambda_trend,
            lambda_season,
            ..self
        }
    }

    pub fn with_orders(self, order_trend: usize, order_season: usize) -> Self {
        Self {
            order_trend,
            order_season,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_trend", self.lambda_trend), ("lambda_season", self.lambda_season)] {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidPenalty(format!("{name} = {l} must be finite and >= 0")));
            }
        }
        for (name, d) in [("order_trend", self.order_trend), ("order_season", self.order_season)] {
            if !(1..=3).contains(&d) {
                return Err(Error::InvalidPenalty(format!("{name} = {d} must be 1, 2 or 3")));
            }
        }
        Ok(())
    }
}

/// Column ranges of the coefficient blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientLayout {
    pub trend: Range<usize>,
    pub cos: Range<usize>,
    pub sin: Range<usize>,
}

impl CoefficientLayout {
    pub fn n_coef(&self) -> usize {
        self.sin.end
    }
}

#[derive(Debug, Clone)]
pub struct DesignBundle {
    pub kind: ModelKind,
    pub x: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub layout: CoefficientLayout,
    /// Log exposure per row, zero when modelling counts.
    pub offset: DVector<f64>,
    /// Shared spline basis for the smooth kinds.
    pub basis: Option<BasisMatrix>,
    pub n_observed: usize,
}

impl DesignBundle {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    pub fn horizon(&self) -> usize {
        self.n_rows() - self.n_observed
    }

    /// Trend part of the linear predictor, offset excluded.
    pub fn trend_predictor(&self, theta: &DVector<f64>) -> DVector<f64> {
        let r = self.layout.trend.clone();
        self.x.columns(r.start, r.len()) * theta.rows(r.start, r.len())
    }

    /// 0/1 observation weights: ones on observed rows, zeros on forecast rows.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_fn(self.n_rows(), |i, _| if i < self.n_observed { 1.0 } else { 0.0 })
    }
}

fn scaled_difference_gram(order: usize, n_coef: usize, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda == 0.0 {
        return Ok(DMatrix::zeros(n_coef, n_coef));
    }
    Ok(make_difference(order, n_coef)?.gram() * lambda)
}

/// Builds the design over `n_observed + horizon` months.
pub fn build_design(
    kind: ModelKind,
    n_observed: usize,
    horizon: usize,
    splines: SplineSettings,
    penalty: &PenaltyConfig,
    exposure: Option<&[f64]>,
) -> Result<DesignBundle> {
    if n_observed < MIN_FIT_MONTHS {
        return Err(Error::ShortSeries {
            len: n_observed,
            min: MIN_FIT_MONTHS,
        });
    }
    penalty.validate()?;
    let rows = n_observed + horizon;
    let offset = match exposure {
        Some(e) if e.len() != rows => {
            return Err(Error::ExposureLengthMismatch {
                got: e.len(),
                expected: rows,
            })
        }
        Some(e) => {
            if e.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::InvalidSeries("exposures must be positive".into()));
            }
            DVector::from_iterator(rows, e.iter().map(|v| v.ln()))
        }
        None => DVector::zeros(rows),
    };
    let h = harmonics(rows, MONTHS_PER_YEAR as f64);

    let (x, p, layout, basis) = match kind {
        ModelKind::Sp => {
            let mut x = DMatrix::zeros(rows, 4);
            for i in 0..rows {
                x[(i, 0)] = 1.0;
                x[(i, 1)] = (i + 1) as f64;
                x[(i, 2)] = h.cos[i];
                x[(i, 3)] = h.sin[i];
            }
            let layout = CoefficientLayout {
                trend: 0..2,
                cos: 2..3,
                sin: 3..4,
            };
            (x, DMatrix::zeros(4, 4), layout, None)
        }
        ModelKind::SpStss => {
            let b = make_basis(&splines.for_domain(rows))?;
            let j = b.n_basis();
            let mut x = DMatrix::zeros(rows, 3 * j);
            x.columns_mut(0, j).copy_from(&b.values);
            x.columns_mut(j, j).copy_from(&(h.cos_diag() * &b.values));
            x.columns_mut(2 * j, j).copy_from(&(h.sin_diag() * &b.values));
            let mut p = DMatrix::zeros(3 * j, 3 * j);
            p.view_mut((0, 0), (j, j))
                .copy_from(&scaled_difference_gram(penalty.order_trend, j, penalty.lambda_trend)?);
            let season = scaled_difference_gram(penalty.order_season, j, penalty.lambda_season)?;
            p.view_mut((j, j), (j, j)).copy_from(&season);
            p.view_mut((2 * j, 2 * j), (j, j)).copy_from(&season);
            let layout = CoefficientLayout {
                trend: 0..j,
                cos: j..2 * j,
                sin: 2 * j..3 * j,
            };
            (x, p, layout, Some(b))
        }
        ModelKind::SpStfs => {
            let b = make_basis(&splines.for_domain(rows))?;
            let j = b.n_basis();
            let mut x = DMatrix::zeros(rows, j + 2);
            x.columns_mut(0, j).copy_from(&b.values);
            x.set_column(j, &h.cos);
            x.set_column(j + 1, &h.sin);
            let mut p = DMatrix::zeros(j + 2, j + 2);
            p.view_mut((0, 0), (j, j))
                .copy_from(&scaled_difference_gram(penalty.order_trend, j, penalty.lambda_trend)?);
            let layout = CoefficientLayout {
                trend: 0..j,
                cos: j..j + 1,
                sin: j + 1..j + 2,
            };
            (x, p, layout, Some(b))
        }
    };

    Ok(DesignBundle {
        kind,
        x,
        penalty: p,
        layout,
        offset,
        basis,
        n_observed,
    })
}

/// Holds future exposure at the mean of the last 12 observed months.
pub fn extend_exposure(exposure: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if exposure.len() < MONTHS_PER_YEAR {
        return Err(Error::ShortSeries {
            len: exposure.len(),
            min: MONTHS_PER_YEAR,
        });
    }
    let tail = &exposure[exposure.len() - MONTHS_PER_YEAR..];
    let mean = tail.iter().sum::<f64>() / MONTHS_PER_YEAR as f64;
    let mut out = exposure.to_vec();
    out.extend(std::iter::repeat_n(mean, horizon));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn design(kind: ModelKind, n1: usize, n2: usize, penalty: PenaltyConfig) -> DesignBundle {
        build_design(kind, n1, n2, SplineSettings::default(), &penalty, None).unwrap()
    }

    #[test]
    fn sp_design_columns() {
        let d = design(ModelKind::Sp, 60, 0, PenaltyConfig::default());
        assert_eq!(d.x.shape(), (60, 4));
        let w = 2.0 * std::f64::consts::PI / 12.0;
        for i in 0..60 {
            let t = (i + 1) as f64;
            assert_eq!(d.x[(i, 0)], 1.0);
            assert_eq!(d.x[(i, 1)], t);
            assert!((d.x[(i, 2)] - (w * t).cos()).abs() < 1e-15);
            assert!((d.x[(i, 3)] - (w * t).sin()).abs() < 1e-15);
        }
        assert_eq!(d.penalty, DMatrix::zeros(4, 4));
    }

    #[test]
    fn stss_extended_shape() {
        let d = design(ModelKind::SpStss, 120, 12, PenaltyConfig::default());
        assert_eq!(d.x.shape(), (132, 75));
        assert_eq!(d.layout.cos, 25..50);
        assert_eq!(d.horizon(), 12);
        assert_eq!(d.weights().sum(), 120.0);
    }

    #[test]
    fn stfs_zero_lambda_has_zero_penalty() {
        let d = design(ModelKind::SpStfs, 60, 0, PenaltyConfig::default().with_lambdas(0.0, 5.0));
        assert_eq!(d.penalty, DMatrix::zeros(15, 15));
        let d = design(ModelKind::SpStfs, 60, 0, PenaltyConfig::default());
        let k = d.n_coef();
        assert!(d.penalty.rows(k - 2, 2).amax() == 0.0);
        assert!(d.penalty.columns(k - 2, 2).amax() == 0.0);
    }

    #[test]
    fn stss_and_stfs_share_trend_columns() {
        let a = design(ModelKind::SpStss, 72, 6, PenaltyConfig::default());
        let b = design(ModelKind::SpStfs, 72, 6, PenaltyConfig::default());
        let j = a.layout.trend.len();
        assert_eq!(a.x.columns(0, j), b.x.columns(0, j));
    }

    #[test]
    fn penalty_is_psd_with_expected_null_space() {
        for (ot, os) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1)] {
            for kind in [ModelKind::SpStss, ModelKind::SpStfs] {
                let pen = PenaltyConfig::default().with_orders(ot, os).with_lambdas(10.0, 3.0);
                let d = design(kind, 48, 12, pen);
                let p = &d.penalty;
                assert_eq!(p, &p.transpose());
                let eig = SymmetricEigen::new(p.clone());
                assert!(eig.eigenvalues.min() >= -1e-10);

                let j = d.layout.trend.len();
                let trend = SymmetricEigen::new(p.view((0, 0), (j, j)).into_owned());
                let tol = 1e-9 * trend.eigenvalues.amax();
                let null_dim = trend.eigenvalues.iter().filter(|v| v.abs() < tol).count();
                assert_eq!(null_dim, ot, "orders ({ot},{os}) {kind}");
            }
        }
    }

    #[test]
    fn short_series_and_exposure_checks() {
        let pen = PenaltyConfig::default();
        assert!(matches!(
            build_design(ModelKind::Sp, 23, 0, SplineSettings::default(), &pen, None),
            Err(Error::ShortSeries { .. })
        ));
        let e = vec![1.0; 30];
        assert!(matches!(
            build_design(ModelKind::Sp, 24, 12, SplineSettings::default(), &pen, Some(&e)),
            Err(Error::ExposureLengthMismatch { got: 30, expected: 36 })
        ));
        let e = vec![std::f64::consts::E; 36];
        let d = build_design(ModelKind::Sp, 24, 12, SplineSettings::default(), &pen, Some(&e)).unwrap();
        assert!(d.offset.iter().all(|&o| (o - 1.0).abs() < 1e-15));
        let bad = PenaltyConfig { order_trend: 4, ..pen };
        assert!(build_design(ModelKind::SpStfs, 24, 0, SplineSettings::default(), &bad, None).is_err());
        let neg = pen.with_lambdas(-1.0, 0.0);
        assert!(matches!(neg.validate(), Err(Error::InvalidPenalty(_))));
    }

    #[test]
    fn exposure_extension() {
        let flat = vec![42.0; 24];
        assert_eq!(extend_exposure(&flat, 5).unwrap()[24..], [42.0; 5]);

        let ramp: Vec<f64> = (1..=12).map(f64::from).collect();
        let ext = extend_exposure(&ramp, 3).unwrap();
        assert_eq!(&ext[12..], &[6.5, 6.5, 6.5]);

        assert_eq!(extend_exposure(&ramp, 0).unwrap(), ramp);
        assert!(extend_exposure(&ramp[..11], 1).is_err());
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("STSS".parse::<ModelKind>().unwrap(), ModelKind::SpStss);
        assert_eq!("sp-stfs".parse::<ModelKind>().unwrap(), ModelKind::SpStfs);
        assert!("gam".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::SpStfs.to_string(), "SP-STFS");
    }
}
