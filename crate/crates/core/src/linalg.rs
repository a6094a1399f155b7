//! Dense symmetric solves for the penalized normal equations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, FullPivLU};

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry count as zero.
const RELATIVE_PIVOT_FLOOR: f64 = 1e-14;

pub enum Factorization {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(FullPivLU<f64, Dyn, Dyn>),
}

impl Factorization {
    /// Cholesky first; full-pivot LU when the matrix is not numerically
    /// positive definite. Fails with `SingularSystem` when both give up.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let scale = a.diagonal().amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::SingularSystem);
        }
        let floor = RELATIVE_PIVOT_FLOOR * scale;
        if let Some(chol) = Cholesky::new(a.clone()) {
            if chol.l_dirty().diagonal().iter().all(|d| d * d > floor) {
                return Ok(Factorization::Cholesky(chol));
            }
        }
        let lu = FullPivLU::new(a.clone());
        let u_diag = lu.u().diagonal();
        let max = u_diag.amax();
        if u_diag.iter().all(|d| d.abs() > RELATIVE_PIVOT_FLOOR * max) {
            log::debug!("normal matrix not positive definite, using pivoted LU");
            Ok(Factorization::Lu(lu))
        } else {
            Err(Error::SingularSystem)
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Factorization::Cholesky(c) => Ok(c.solve(b)),
            Factorization::Lu(lu) => lu.solve(b).ok_or(Error::SingularSystem),
        }
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let inv = match self {
            Factorization::Cholesky(c) => c.inverse(),
            Factorization::Lu(lu) => lu.try_inverse().ok_or(Error::SingularSystem)?,
        };
        // symmetrize away rounding
        Ok((&inv + inv.transpose()) * 0.5)
    }
}

/// `X' diag(w) X`.
pub fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    x.transpose() * xw
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = Factorization::new(&a).unwrap();
        assert!(matches!(f, Factorization::Cholesky(_)));
        let x = f.solve(&DVector::from_row_slice(&[1.0, 2.0])).unwrap();
        assert!((&a * &x - DVector::from_row_slice(&[1.0, 2.0])).amax() < 1e-14);
        assert!((f.inverse().unwrap() * &a - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn falls_back_to_lu_for_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = Factorization::new(&a).unwrap();
        assert!(matches!(f, Factorization::Lu(_)));
        let x = f.solve(&DVector::from_row_slice(&[3.0, 3.0])).unwrap();
        assert!((x - DVector::from_row_slice(&[1.0, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(Factorization::new(&a), Err(Error::SingularSystem)));
        assert!(matches!(Factorization::new(&DMatrix::zeros(3, 3)), Err(Error::SingularSystem)));
    }

    #[test]
    fn gram_matches_explicit_product() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = DVector::from_row_slice(&[1.0, 0.0, 2.0]);
        let explicit = x.transpose() * DMatrix::from_diagonal(&w) * &x;
        assert_eq!(weighted_gram(&x, &w), explicit);
    }
}
