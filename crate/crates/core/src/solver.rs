//! Penalized iteratively weighted least squares for Poisson log-linear models.
//!
//! Each iteration solves
//!
//! ```text
//! (X' V M X + P) theta_new = X' V M X theta + X' V (y - mu)
//! ```
//!
//! with `M = diag(mu)` and `V` the 0/1 observation weights. Rows with zero
//! weight are carried along so that fitted and forecast values come out of
//! the same solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignBundle;
use crate::error::{Error, Result};
use crate::linalg::{weighted_gram, Factorization};

pub const MAX_ITERATIONS: usize = 100;
/// Stop once the linear predictor moves less than this on every observed row.
pub const ETA_TOLERANCE: f64 = 1e-7;
const MAX_STEP_HALVINGS: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: DVector<f64>,
    /// Linear predictor over all rows, offset included.
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    /// Poisson deviance over observed rows.
    pub deviance: f64,
    /// `deviance + theta' P theta`.
    pub penalized_deviance: f64,
    /// Effective dimension, `tr(X'VMX (X'VMX + P)^-1)`.
    pub ed: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(X' V M X + P)^-1` at the fitted means.
    pub cov_factor: DMatrix<f64>,
    pub n_observed: usize,
}

impl FitResult {
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
            })
        }
    }

    /// Variance of the linear predictor `x' theta` for each row of `x`.
    pub fn predictor_variance(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let xf = x * &self.cov_factor;
        DVector::from_fn(x.nrows(), |i, _| xf.row(i).dot(&x.row(i)))
    }
}

/// Poisson deviance `2 sum w [y log(y/mu) - (y - mu)]`, with `0 log 0 = 0`.
pub fn deviance(y: &[f64], mu: &[f64], weights: &[f64]) -> Result<f64> {
    if y.len() != mu.len() || y.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "y {}, mu {}, weights {}",
            y.len(),
            mu.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for ((&yi, &mi), &wi) in y.iter().zip(mu).zip(weights) {
        if wi == 0.0 {
            continue;
        }
        if !(mi > 0.0) {
            return Err(Error::NonPositiveMu(mi));
        }
        let log_term = if yi == 0.0 { 0.0 } else { yi * (yi / mi).ln() };
        total += wi * (log_term - (yi - mi));
    }
    Ok(2.0 * total)
}

fn check_weights(weights: &DVector<f64>, n_observed: usize) -> Result<()> {
    if let Some(i) = weights.iter().position(|&w| w != 0.0 && w != 1.0) {
        return Err(Error::InvalidWeights(format!("weight {} at row {i} is not 0 or 1", weights[i])));
    }
    let ones = weights.iter().filter(|&&w| w == 1.0).count();
    let prefix = weights.iter().take_while(|&&w| w == 1.0).count();
    if ones != prefix {
        return Err(Error::InvalidWeights("observed rows must precede forecast rows".into()));
    }
    if ones != n_observed {
        return Err(Error::InvalidWeights(format!(
            "{ones} observed rows but {n_observed} observations"
        )));
    }
    Ok(())
}

fn quad_form(p: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    theta.dot(&(p * theta))
}

/// Fits a bundle built by [`crate::design::build_design`].
pub fn fit(bundle: &DesignBundle, y: &[f64], weights: &DVector<f64>) -> Result<FitResult> {
    if y.len() != bundle.n_observed {
        return Err(Error::LengthMismatch(format!(
            "{} observations for a design with {} observed rows",
            y.len(),
            bundle.n_observed
        )));
    }
    fit_matrices(&bundle.x, &bundle.penalty, &bundle.offset, y, weights)
}

/// Penalized IWLS on raw matrices: `log mu = offset + x theta`, with `y`
/// aligned to the leading rows whose weight is one.
pub fn fit_matrices(
    x: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    offset: &DVector<f64>,
    y: &[f64],
    weights: &DVector<f64>,
) -> Result<FitResult> {
    let (rows, k) = x.shape();
    if weights.len() != rows || offset.len() != rows || penalty.shape() != (k, k) {
        return Err(Error::LengthMismatch(format!(
            "design {rows}x{k}, weights {}, offset {}, penalty {:?}",
            weights.len(),
            offset.len(),
            penalty.shape()
        )));
    }
    check_weights(weights, y.len())?;
    if y.is_empty() {
        return Err(Error::Empty("no observations".into()));
    }
    if let Some(bad) = y.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidSeries(format!("observation {bad} is not a non-negative count")));
    }
    let n_obs = y.len();
    let y_full = DVector::from_fn(rows, |i, _| if i < n_obs { y[i] } else { 0.0 });

    let start_fill = y.iter().map(|v| v + 0.5).sum::<f64>() / n_obs as f64;
    let mut mu = DVector::from_fn(rows, |i, _| if i < n_obs { y[i] + 0.5 } else { start_fill });
    let mut eta = mu.map(f64::ln);

    // first step from the working response z = eta + (y - mu) / mu
    let w = weights.component_mul(&mu);
    let z = DVector::from_fn(rows, |i, _| eta[i] - offset[i] + (y_full[i] - mu[i]) / mu[i]);
    let a = weighted_gram(x, &w) + penalty;
    let mut theta = Factorization::new(&a)?.solve(&x.tr_mul(&w.component_mul(&z)))?;

    let obs_dev = |mu: &DVector<f64>| deviance(y, &mu.as_slice()[..n_obs], &vec![1.0; n_obs]);
    let mut theta_prev: Option<DVector<f64>> = None;
    let mut prev_pen_dev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 1;
    let mut pen_dev;

    loop {
        let mut eta_new = x * &theta + offset;
        let mut mu_new = eta_new.map(f64::exp);
        if !eta_new.iter().chain(mu_new.iter()).all(|v| v.is_finite()) {
            return Err(Error::Diverged { iteration: iterations });
        }
        pen_dev = obs_dev(&mu_new)? + quad_form(penalty, &theta);

        if let Some(prev) = &theta_prev {
            let mut halvings = 0;
            while pen_dev > prev_pen_dev + 1e-9 * prev_pen_dev.abs().max(1.0) && halvings < MAX_STEP_HALVINGS {
                theta = (&theta + prev) * 0.5;
                eta_new = x * &theta + offset;
                mu_new = eta_new.map(f64::exp);
                pen_dev = obs_dev(&mu_new)? + quad_form(penalty, &theta);
                halvings += 1;
            }
            if halvings > 0 {
                log::warn!("penalized deviance increased at iteration {iterations}; step halved {halvings} times");
            }
        }

        let delta = (0..n_obs).map(|i| (eta_new[i] - eta[i]).abs()).fold(0.0, f64::max);
        eta = eta_new;
        mu = mu_new;
        prev_pen_dev = pen_dev;
        if delta < ETA_TOLERANCE {
            converged = true;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            log::warn!("IWLS stopped after {iterations} iterations without converging (last change {delta:.3e})");
            break;
        }

        let w = weights.component_mul(&mu);
        let gram = weighted_gram(x, &w);
        let rhs = &gram * &theta + x.tr_mul(&weights.component_mul(&(&y_full - &mu)));
        let next = Factorization::new(&(gram + penalty))?.solve(&rhs)?;
        theta_prev = Some(std::mem::replace(&mut theta, next));
        iterations += 1;
    }

    let gram = weighted_gram(x, &weights.component_mul(&mu));
    let cov_factor = Factorization::new(&(&gram + penalty))?.inverse()?;
    let ed = trace_of_product(&gram, &cov_factor);
    let dev = obs_dev(&mu)?;

    Ok(FitResult {
        theta,
        eta,
        mu,
        deviance: dev,
        penalized_deviance: pen_dev,
        ed,
        iterations,
        converged,
        cov_factor,
        n_observed: n_obs,
    })
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(AB) = sum_ij A_ij B_ji
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// `tr(X'VMX (X'VMX + P)^-1)` at the fitted means of `fit`.
pub fn effective_dimension(fit: &FitResult, bundle: &DesignBundle) -> Result<f64> {
    if fit.mu.len() != bundle.n_rows() {
        return Err(Error::LengthMismatch("fit does not belong to this design".into()));
    }
    let gram = weighted_gram(&bundle.x, &bundle.weights().component_mul(&fit.mu));
    let inv = Factorization::new(&(&gram + &bundle.penalty))?.inverse()?;
    Ok(trace_of_product(&gram, &inv))
}
