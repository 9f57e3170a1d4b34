use nalgebra::{DMatrix, DVector};

use super::FittedModel;
use crate::error::{Error, Result};

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Intercept first, then one slope per covariate.
    pub coefficients: Vec<f64>,
    /// Ridge penalty used when the normal system was singular; 0 otherwise.
    pub ridge: f64,
    rows: usize,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

impl FittedModel for LinearModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let b0 = self.coefficients[0];
        let mut out = vec![b0; x.nrows()];
        for (j, b) in self.coefficients[1..].iter().enumerate() {
            for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                *o += b * v;
            }
        }
        out
    }

    fn training_rows(&self) -> usize {
        self.rows
    }
}

/// `[1 | X]`.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    z.columns_mut(1, x.ncols()).copy_from(x);
    z
}

/// Cholesky solve that reports near-zero pivots as singular.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-10 * scale) {
        return None;
    }
    let sol = chol.solve(b);
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Least squares fit of `y` on `[1 | X]`. A singular normal system is
/// replaced by the ridge system with `λ = 1e−8 · trace / (d + 1)`.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Estimation("linear fit: zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::Estimation(format!("linear fit: {n} rows but {} targets", y.len())));
    }
    let z = with_intercept(x);
    let zt = z.transpose();
    let gram = &zt * &z;
    let rhs = &zt * DVector::from_column_slice(y);
    if let Some(beta) = solve_spd(&gram, &rhs) {
        return Ok(LinearModel { coefficients: beta.as_slice().to_vec(), ridge: 0.0, rows: n });
    }
    let p = gram.nrows();
    let lambda = 1e-8 * gram.trace() / p as f64;
    let mut reg = gram;
    for i in 0..p {
        reg[(i, i)] += lambda;
    }
    let beta = reg
        .cholesky()
        .map(|c| c.solve(&rhs))
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Estimation("linear fit: ridge system is not positive definite".into()))?;
    Ok(LinearModel { coefficients: beta.as_slice().to_vec(), ridge: lambda, rows: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_affine_targets() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * j as f64);
        let y: Vec<f64> = (0..20).map(|i| 1.5 - 2.0 * x[(i, 0)] + 0.25 * x[(i, 1)]).collect();
        let m = fit_linear(&x, &y).unwrap();
        assert_eq!(m.ridge, 0.0);
        for (p, t) in m.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() <= 1e-8 * t.abs().max(1.0), "{p} vs {t}");
        }
    }

    #[test]
    fn constant_column_gives_mean() {
        let x = DMatrix::from_element(6, 1, 3.0);
        let y = [1.0, 4.0, -2.0, 0.5, 7.0, 2.5];
        let m = fit_linear(&x, &y).unwrap();
        assert!(m.ridge > 0.0);
        let mean = y.iter().sum::<f64>() / 6.0;
        for p in m.predict(&x) {
            assert!((p - mean).abs() < 1e-6, "{p} vs {mean}");
        }
    }

    #[test]
    fn duplicated_column_uses_ridge() {
        let base: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let x = DMatrix::from_fn(10, 2, |i, _| base[i]);
        let y: Vec<f64> = base.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit_linear(&x, &y).unwrap();
        assert!(m.ridge > 0.0);
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
        for (p, t) in m.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-5);
        }
    }

    #[test]
    fn intercept_only_design() {
        let x = DMatrix::<f64>::zeros(4, 0);
        let m = fit_linear(&x, &[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(m.predict(&x), vec![3.0; 4]);
        assert!(fit_linear(&DMatrix::<f64>::zeros(0, 1), &[]).is_err());
    }
}
