#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// `Dev(theta) + theta' P theta` over the weighted rows, with its gradient.
pub fn objective(
    x: &DMatrix<f64>,
    p: &DMatrix<f64>,
    offset: &DVector<f64>,
    y: &[f64],
    w: &DVector<f64>,
    theta: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let eta = x * theta + offset;
    let mut dev = 0.0;
    let mut resid = DVector::zeros(x.nrows());
    for i in 0..y.len() {
        if w[i] == 0.0 {
            continue;
        }
        let mu = eta[i].exp();
        let yl = if y[i] > 0.0 { y[i] * (y[i] / mu).ln() } else { 0.0 };
        dev += 2.0 * (yl - (y[i] - mu));
        resid[i] = y[i] - mu;
    }
    let pt = p * theta;
    let value = dev + theta.dot(&pt);
    let grad = -2.0 * x.transpose() * resid + 2.0 * pt;
    (value, grad)
}

fn hessian(x: &DMatrix<f64>, p: &DMatrix<f64>, offset: &DVector<f64>, w: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
    let eta = x * theta + offset;
    let mut scaled = x.clone();
    for i in 0..x.nrows() {
        let m = w[i] * eta[i].exp();
        scaled.row_mut(i).scale_mut(m);
    }
    2.0 * x.transpose() * scaled + 2.0 * p
}

/// Minimizes the penalized deviance with BFGS and an Armijo backtracking
/// line search, then polishes with damped Newton steps on the same
/// objective. Starts from a least-squares fit of `log(y + 0.5)`.
pub fn minimize(
    x: &DMatrix<f64>,
    p: &DMatrix<f64>,
    offset: &DVector<f64>,
    y: &[f64],
    w: &DVector<f64>,
) -> DVector<f64> {
    let n = y.len();
    let k = x.ncols();
    let x_obs = x.rows(0, n).into_owned();
    let z = DVector::from_iterator(n, (0..n).map(|i| (y[i] + 0.5).ln() - offset[i]));
    let ridge = x_obs.transpose() * &x_obs + DMatrix::<f64>::identity(k, k) * 1e-3;
    let mut theta = ridge.lu().solve(&(x_obs.transpose() * z)).expect("ridge start");

    let f = |t: &DVector<f64>| objective(x, p, offset, y, w, t);
    let (mut fx, mut g) = f(&theta);
    let mut h_inv = DMatrix::<f64>::identity(k, k) / (1.0 + g.norm());
    for _ in 0..5000 {
        if g.amax() < 1e-9 {
            break;
        }
        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(k, k) / (1.0 + g.norm());
            dir = -(&h_inv * &g);
        }
        let mut step = 1.0;
        let slope = dir.dot(&g);
        let (next, fn_, gn) = loop {
            let cand = &theta + step * &dir;
            let (fc, gc) = f(&cand);
            if fc.is_finite() && fc <= fx + 1e-4 * step * slope {
                break (cand, fc, gc);
            }
            step *= 0.5;
            if step < 1e-20 {
                break (theta.clone(), fx, g.clone());
            }
        };
        let s = &next - &theta;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if s.amax() == 0.0 {
            break;
        }
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(k, k);
            let left = &eye - rho * &s * yv.transpose();
            let right = &eye - rho * &yv * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        theta = next;
        fx = fn_;
        g = gn;
    }

    for _ in 0..200 {
        let h = hessian(x, p, offset, w, &theta);
        let dir = match h.clone().cholesky() {
            Some(c) => -c.solve(&g),
            None => -h.lu().solve(&g).expect("nonsingular Hessian"),
        };
        let decrement = -dir.dot(&g);
        if decrement <= 1e-24 {
            break;
        }
        let mut step = 1.0;
        loop {
            let cand = &theta + step * &dir;
            let (fc, gc) = f(&cand);
            let tiny = step * dir.amax() < 1e-14 * (1.0 + theta.amax());
            if fc <= fx - 1e-4 * step * decrement || tiny {
                theta = cand;
                fx = fc;
                g = gc;
                break;
            }
            step *= 0.5;
        }
    }
    theta
}
