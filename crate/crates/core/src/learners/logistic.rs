use nalgebra::{DMatrix, DVector};

use super::linear::{solve_spd, with_intercept};
use super::FittedModel;
use crate::error::{Error, Result};
use crate::stats::expit;

const MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const SEPARATION_NORM: f64 = 1e4;
const SEPARATION_RIDGE: f64 = 1e-4;

/// Logistic regression with an intercept, fitted by IRLS.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    /// Ridge penalty on the slopes, nonzero only after separation was detected.
    pub ridge: f64,
    pub iterations: usize,
    pub converged: bool,
    rows: usize,
}

impl FittedModel for LogisticModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut eta = vec![self.coefficients[0]; x.nrows()];
        for (j, b) in self.coefficients[1..].iter().enumerate() {
            for (e, v) in eta.iter_mut().zip(x.column(j).iter()) {
                *e += b * v;
            }
        }
        eta.into_iter().map(expit).collect()
    }

    fn training_rows(&self) -> usize {
        self.rows
    }
}

struct Irls {
    beta: DVector<f64>,
    iterations: usize,
    converged: bool,
}

/// Newton–Raphson on the mean log-likelihood minus `ridge/2 · |slopes|²`.
fn irls(z: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> Option<Irls> {
    let (n, p) = z.shape();
    let nf = n as f64;
    let mut beta = DVector::zeros(p);
    let objective = |b: &DVector<f64>| -> f64 {
        let eta = z * b;
        let ll: f64 = eta
            .iter()
            .zip(t.iter())
            .map(|(&e, &y)| y * e - if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() })
            .sum::<f64>()
            / nf;
        ll - 0.5 * ridge * b.rows(1, p - 1).norm_squared()
    };
    let mut current = objective(&beta);
    for iter in 0..MAX_ITER {
        let eta = z * &beta;
        let prob = eta.map(expit);
        let mut score = z.transpose() * (t - &prob) / nf;
        let w = prob.map(|q| q * (1.0 - q));
        let mut hess = z.transpose() * DMatrix::from_fn(n, p, |i, j| z[(i, j)] * w[i]) / nf;
        for j in 1..p {
            score[j] -= ridge * beta[j];
            hess[(j, j)] += ridge;
        }
        if score.amax() < SCORE_TOL {
            return Some(Irls { beta, iterations: iter, converged: true });
        }
        let step = solve_spd(&hess, &score)?;
        let mut scale = 1.0;
        loop {
            let cand = &beta + &step * scale;
            let val = objective(&cand);
            if val.is_finite() && val >= current - 1e-14 {
                beta = cand;
                current = val;
                break;
            }
            scale *= 0.5;
            if scale < 1e-10 {
                return Some(Irls { beta, iterations: iter + 1, converged: false });
            }
        }
        if !beta.iter().all(|b| b.is_finite()) || beta.norm() > SEPARATION_NORM {
            return None;
        }
    }
    Some(Irls { beta, iterations: MAX_ITER, converged: false })
}

/// True when the linear predictor classifies every unit correctly, in which
/// case the unpenalized maximum likelihood estimate does not exist.
fn separates(z: &DMatrix<f64>, t: &DVector<f64>, beta: &DVector<f64>) -> bool {
    let eta = z * beta;
    eta.iter().zip(t.iter()).all(|(&e, &y)| if y > 0.5 { e > 0.0 } else { e < 0.0 })
}

/// Maximum-likelihood logistic fit of binary `t` on `[1 | X]`.
///
/// Separation (coefficient norm above 1e4, a diverging iteration, or a fit
/// that perfectly classifies the sample) triggers a refit with ridge 1e−4.
pub fn fit_logistic(x: &DMatrix<f64>, t: &[f64]) -> Result<LogisticModel> {
    let n = x.nrows();
    if t.len() != n {
        return Err(Error::Estimation(format!("logistic fit: {n} rows but {} labels", t.len())));
    }
    if t.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Estimation("logistic fit: labels must be 0 or 1".into()));
    }
    let ones = t.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::Estimation("logistic fit: single-class input".into()));
    }
    let z = with_intercept(x);
    let tv = DVector::from_column_slice(t);
    let plain = irls(&z, &tv, 0.0).filter(|fit| x.ncols() == 0 || !separates(&z, &tv, &fit.beta));
    let (fit, ridge) = match plain {
        Some(fit) => (fit, 0.0),
        None => {
            log::debug!("logistic fit: separation detected, refitting with ridge {SEPARATION_RIDGE}");
            let fit = irls(&z, &tv, SEPARATION_RIDGE)
                .ok_or_else(|| Error::Estimation("logistic fit: penalized IRLS diverged".into()))?;
            (fit, SEPARATION_RIDGE)
        }
    };
    Ok(LogisticModel {
        coefficients: fit.beta.as_slice().to_vec(),
        ridge,
        iterations: fit.iterations,
        converged: fit.converged,
        rows: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_recovers_fraction() {
        let x = DMatrix::<f64>::zeros(10, 0);
        let t = [1., 1., 1., 0., 0., 0., 0., 0., 0., 0.];
        let m = fit_logistic(&x, &t).unwrap();
        assert!(m.converged);
        for p in m.predict(&x) {
            assert!((p - 0.3).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn separable_data_falls_back_to_ridge() {
        let x = DMatrix::from_column_slice(6, 1, &[-3., -2., -1., 1., 2., 3.]);
        let t = [0., 0., 0., 1., 1., 1.];
        let m = fit_logistic(&x, &t).unwrap();
        assert_eq!(m.ridge, SEPARATION_RIDGE);
        let q = DMatrix::from_column_slice(3, 1, &[-50., 0., 50.]);
        for p in m.predict(&x).into_iter().chain(m.predict(&q)) {
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }

    #[test]
    fn single_class_is_an_error() {
        let x = DMatrix::from_column_slice(3, 1, &[1., 2., 3.]);
        assert!(fit_logistic(&x, &[1., 1., 1.]).is_err());
        assert!(fit_logistic(&x, &[0., 0., 0.]).is_err());
    }

    #[test]
    fn score_vanishes_at_the_estimate() {
        let x = DMatrix::from_column_slice(8, 1, &[-2., -1.5, -1., -0.5, 0.5, 1., 1.5, 2.]);
        let t = [0., 0., 1., 0., 1., 0., 1., 1.];
        let m = fit_logistic(&x, &t).unwrap();
        assert!(m.converged && m.ridge == 0.0);
        let p = m.predict(&x);
        let s0: f64 = t.iter().zip(&p).map(|(a, b)| a - b).sum();
        let s1: f64 = (0..8).map(|i| x[(i, 0)] * (t[i] - p[i])).sum();
        assert!(s0.abs() < 1e-7 && s1.abs() < 1e-7);
        assert!(m.coefficients[1] > 0.0);
    }
}
