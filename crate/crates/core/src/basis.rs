//! B-spline bases on the month index, harmonic terms and difference matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MONTHS_PER_YEAR: usize = 12;

/// Degree and knot density of the spline bases, independent of domain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineSettings {
    pub degree: usize,
    pub segments_per_year: usize,
}

impl Default for SplineSettings {
    fn default() -> Self {
        Self {
            degree: 3,
            segments_per_year: 2,
        }
    }
}

impl SplineSettings {
    pub fn for_domain(self, domain_length: usize) -> BasisSpec {
        BasisSpec {
            degree: self.degree,
            segments_per_year: self.segments_per_year,
            domain_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degree: usize,
    pub segments_per_year: usize,
    /// Number of months covered.
    pub domain_length: usize,
}

impl BasisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::DegenerateDomain("degree must be at least 1".into()));
        }
        if self.segments_per_year < 1 {
            return Err(Error::DegenerateDomain(
                "need at least one segment per year".into(),
            ));
        }
        if self.domain_length < MONTHS_PER_YEAR {
            return Err(Error::DegenerateDomain(format!(
                "domain of {} months is shorter than a year",
                self.domain_length
            )));
        }
        Ok(())
    }

    /// Equal-width segments over the domain; partial years round up.
    pub fn segments(&self) -> usize {
        (self.domain_length * self.segments_per_year).div_ceil(MONTHS_PER_YEAR)
    }

    pub fn n_basis(&self) -> usize {
        self.segments() + self.degree
    }
}

/// B-spline basis evaluated at t = 1..T.
///
/// Month `t` occupies the cell `(t - 1/2, t + 1/2)`, so the domain is
/// `[1/2, T + 1/2]` and a whole year always spans exactly `12` units. With
/// the default density a knot falls every 6 months, and a basis over a
/// longer domain shares every knot of a shorter one when the extension is a
/// whole number of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub values: DMatrix<f64>,
    /// Full knot sequence, `degree` knots beyond each boundary included.
    pub knots: Vec<f64>,
    pub degree: usize,
    pub segments: usize,
}

impl BasisMatrix {
    pub fn n_basis(&self) -> usize {
        self.values.ncols()
    }

    /// Knots on the domain itself (interior plus the two boundary knots).
    pub fn domain_knots(&self) -> &[f64] {
        &self.knots[self.degree..self.knots.len() - self.degree]
    }

    /// Evaluates every basis function at an arbitrary point of the domain.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.n_basis()];
        let (first, local) = basis_functions(&self.knots, self.degree, self.segments, x);
        row[first..first + local.len()].copy_from_slice(&local);
        row
    }
}

/// Index of the knot span holding `x`, clamped to the domain's spans.
fn find_span(knots: &[f64], degree: usize, segments: usize, x: f64) -> usize {
    let (lo, hi) = (degree, degree + segments - 1);
    if x >= knots[hi + 1] {
        return hi;
    }
    if x <= knots[lo] {
        return lo;
    }
    let mut span = lo;
    while span < hi && x >= knots[span + 1] {
        span += 1;
    }
    span
}

/// Cox-de Boor recursion in triangular form: returns the first nonzero column
/// and the `degree + 1` values of the functions supported on that span.
fn basis_functions(knots: &[f64], degree: usize, segments: usize, x: f64) -> (usize, Vec<f64>) {
    let span = find_span(knots, degree, segments, x);
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span - degree, n)
}

pub fn make_basis(spec: &BasisSpec) -> Result<BasisMatrix> {
    spec.validate()?;
    let segments = spec.segments();
    if segments < 1 {
        return Err(Error::DegenerateDomain("no segments".into()));
    }
    let degree = spec.degree;
    let (xl, xr) = (0.5, spec.domain_length as f64 + 0.5);
    let dx = (xr - xl) / segments as f64;
    let knots: Vec<f64> = (0..=segments + 2 * degree)
        .map(|i| xl + (i as f64 - degree as f64) * dx)
        .collect();

    let n_basis = segments + degree;
    let mut values = DMatrix::zeros(spec.domain_length, n_basis);
    for t in 1..=spec.domain_length {
        let (first, local) = basis_functions(&knots, degree, segments, t as f64);
        for (k, v) in local.into_iter().enumerate() {
            values[(t - 1, first + k)] = v;
        }
    }
    Ok(BasisMatrix {
        values,
        knots,
        degree,
        segments,
    })
}

/// `(J - order) x J` matrix of `order`-th differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    pub order: usize,
    pub values: DMatrix<f64>,
}

impl DifferenceMatrix {
    /// `D'D`, the unscaled penalty block.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.transpose() * &self.values
    }
}

fn first_differences(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    d
}

pub fn make_difference(order: usize, n_coef: usize) -> Result<DifferenceMatrix> {
    if order == 0 || order >= n_coef {
        return Err(Error::OrderTooLarge {
            order,
            columns: n_coef,
        });
    }
    let mut values = first_differences(n_coef);
    for k in 2..=order {
        values = first_differences(n_coef - k + 1) * values;
    }
    Ok(DifferenceMatrix { order, values })
}

/// `cos(wt)` and `sin(wt)` for t = 1..T with `w = 2 pi / period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonics {
    pub cos: DVector<f64>,
    pub sin: DVector<f64>,
}

impl Harmonics {
    pub fn cos_diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.cos)
    }

    pub fn sin_diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.sin)
    }
}

pub fn harmonics(len: usize, period: f64) -> Harmonics {
    let w = 2.0 * std::f64::consts::PI / period;
    Harmonics {
        cos: DVector::from_fn(len, |i, _| (w * (i + 1) as f64).cos()),
        sin: DVector::from_fn(len, |i, _| (w * (i + 1) as f64).sin()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(months: usize) -> BasisMatrix {
        make_basis(&SplineSettings::default().for_domain(months)).unwrap()
    }

    #[test]
    fn ten_years_gives_twenty_three_cubic_splines() {
        let b = basis(120);
        assert_eq!(b.segments, 20);
        assert_eq!(b.domain_knots().len(), 21);
        assert_eq!(b.n_basis(), 23);
        assert_eq!(b.values.nrows(), 120);
    }

    #[test]
    fn five_years_gives_thirteen() {
        assert_eq!(basis(60).n_basis(), 13);
        // extended 10-year + 1-year domain
        assert_eq!(basis(132).n_basis(), 25);
    }

    #[test]
    fn partial_years_round_up() {
        let spec = SplineSettings::default().for_domain(125);
        assert_eq!(spec.segments(), 21);
        let b = make_basis(&spec).unwrap();
        let knots = b.domain_knots();
        let width = knots[1] - knots[0];
        for w in knots.windows(2) {
            assert!((w[1] - w[0] - width).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_of_unity_and_sparsity() {
        for months in [24, 60, 67, 120, 132] {
            let b = basis(months);
            for r in 0..months {
                let row = b.values.row(r);
                assert!((row.sum() - 1.0).abs() < 1e-12, "row {r} of {months}");
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!(row.iter().filter(|&&v| v != 0.0).count() <= b.degree + 1);
            }
        }
    }

    #[test]
    fn local_support() {
        let b = basis(120);
        for j in 0..b.n_basis() {
            let (lo, hi) = (b.knots[j], b.knots[j + b.degree + 1]);
            for t in 1..=120 {
                let x = t as f64;
                if x <= lo || x >= hi {
                    assert_eq!(b.values[(t - 1, j)], 0.0, "column {j} at t={t}");
                }
            }
        }
    }

    #[test]
    fn other_degrees() {
        for degree in [1, 2, 4] {
            let spec = BasisSpec {
                degree,
                segments_per_year: 1,
                domain_length: 36,
            };
            let b = make_basis(&spec).unwrap();
            assert_eq!(b.n_basis(), 3 + degree);
            for r in 0..36 {
                assert!((b.values.row(r).sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            BasisSpec { degree: 0, segments_per_year: 2, domain_length: 60 },
            BasisSpec { degree: 3, segments_per_year: 0, domain_length: 60 },
            BasisSpec { degree: 3, segments_per_year: 2, domain_length: 11 },
        ];
        for spec in bad {
            assert!(matches!(make_basis(&spec), Err(Error::DegenerateDomain(_))));
        }
    }

    #[test]
    fn difference_matrices() {
        let d1 = make_difference(1, 4).unwrap();
        let expected1 = DMatrix::from_row_slice(3, 4, &[
            -1.0, 1.0, 0.0, 0.0,
            0.0, -1.0, 1.0, 0.0,
            0.0, 0.0, -1.0, 1.0,
        ]);
        assert_eq!(d1.values, expected1);

        let d2 = make_difference(2, 4).unwrap();
        let expected2 = DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 1.0, 0.0, 0.0, 1.0, -2.0, 1.0]);
        assert_eq!(d2.values, expected2);

        let lin = DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d2.values * lin, DVector::zeros(2));

        assert!(matches!(make_difference(4, 4), Err(Error::OrderTooLarge { .. })));
        assert!(make_difference(0, 4).is_err());
    }

    #[test]
    fn differences_annihilate_low_degree_polynomials() {
        for order in 1..=3 {
            let d = make_difference(order, 12).unwrap();
            assert_eq!(d.values.shape(), (12 - order, 12));
            for deg in 0..order {
                let poly = DVector::from_fn(12, |j, _| (j as f64 + 3.0).powi(deg as i32) - 7.0);
                assert_eq!(&d.values * poly, DVector::zeros(12 - order));
            }
        }
    }

    #[test]
    fn harmonic_values() {
        let h = harmonics(24, 12.0);
        assert!((h.cos[11] - 1.0).abs() < 1e-12);
        assert!(h.sin[11].abs() < 1e-12);
        assert!(h.cos[2].abs() < 1e-12);
        assert!((h.sin[2] - 1.0).abs() < 1e-12);
        for t in 0..24 {
            assert!((h.cos[t].powi(2) + h.sin[t].powi(2) - 1.0).abs() < 1e-12);
        }
        assert_eq!(h.cos_diag()[(5, 5)], h.cos[5]);
        assert_eq!(h.sin_diag()[(5, 4)], 0.0);
    }

    #[test]
    fn extended_basis_shares_knots() {
        let fit = basis(120);
        let ext = basis(132);
        for (a, b) in fit.knots.iter().zip(&ext.knots) {
            assert!((a - b).abs() < 1e-12);
        }
        let shared = ext.values.view((0, 0), (120, 23));
        assert!((shared - &fit.values).amax() < 1e-12);
        assert!(ext.values.view((0, 23), (120, 2)).amax() == 0.0);
    }

    #[test]
    fn evaluate_matches_rows() {
        let b = basis(60);
        let row = b.evaluate(17.0);
        for j in 0..b.n_basis() {
            assert_eq!(row[j], b.values[(16, j)]);
        }
    }
}
