use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FittedModel;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    #[default]
    /// Silverman's rule per dimension: `1.06 · sd_j · n^(−1/(4+d))`.
    Auto,
    /// The same bandwidth in every dimension.
    Fixed(f64),
}

/// Nadaraya–Watson smoother with a product Gaussian kernel.
#[derive(Debug, Clone)]
pub struct KernelModel {
    /// Training covariates, row-major.
    train: Vec<f64>,
    y: Vec<f64>,
    d: usize,
    /// Per-dimension bandwidths. Infinite entries (zero-variance columns under
    /// `Auto`) drop out of the kernel.
    pub bandwidths: Vec<f64>,
}

pub fn fit_kernel(x: &DMatrix<f64>, y: &[f64], bandwidth: Bandwidth) -> Result<KernelModel> {
    let (n, d) = x.shape();
    if n == 0 {
        return Err(Error::Estimation("kernel fit: zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::Estimation(format!("kernel fit: {n} rows but {} targets", y.len())));
    }
    let bandwidths = match bandwidth {
        Bandwidth::Fixed(h) if !(h > 0.0) => {
            return Err(Error::invalid("bandwidth", format!("must be positive, got {h}")))
        }
        Bandwidth::Fixed(h) => vec![h; d],
        Bandwidth::Auto => {
            let factor = 1.06 * (n as f64).powf(-1.0 / (4.0 + d as f64));
            (0..d)
                .map(|j| {
                    let col: Vec<f64> = x.column(j).iter().copied().collect();
                    let h = factor * sample_sd(&col);
                    if h > 0.0 { h } else { f64::INFINITY }
                })
                .collect()
        }
    };
    let mut train = Vec::with_capacity(n * d);
    for i in 0..n {
        train.extend(x.row(i).iter());
    }
    Ok(KernelModel { train, y: y.to_vec(), d, bandwidths })
}

impl KernelModel {
    pub fn predict_row(&self, q: &[f64]) -> f64 {
        let n = self.y.len();
        if self.d == 0 {
            return mean(&self.y);
        }
        let inv: Vec<f64> = self.bandwidths.iter().map(|h| 1.0 / h).collect();
        let mut logw = Vec::with_capacity(n);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..n {
            let row = &self.train[i * self.d..(i + 1) * self.d];
            let mut s = 0.0;
            for j in 0..self.d {
                let u = (row[j] - q[j]) * inv[j];
                s += u * u;
            }
            let lw = -0.5 * s;
            if lw > best.0 {
                best = (lw, i);
            }
            logw.push(lw);
        }
        if best.0.exp() == 0.0 {
            // every raw weight underflows: nearest training point
            return self.y[best.1];
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (lw, y) in logw.iter().zip(&self.y) {
            let w = (lw - best.0).exp();
            num += w * y;
            den += w;
        }
        num / den
    }
}

impl FittedModel for KernelModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut q = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|i| {
                for (j, v) in q.iter_mut().enumerate() {
                    *v = x[(i, j)];
                }
                self.predict_row(&q)
            })
            .collect()
    }

    fn training_rows(&self) -> usize {
        self.y.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 2, |i, j| ((i * 13 + j * 5) % 17) as f64 / 4.0 - 2.0)
    }

    #[test]
    fn constant_targets_are_reproduced() {
        let x = grid(30);
        let m = fit_kernel(&x, &[2.5; 30], Bandwidth::Auto).unwrap();
        for p in m.predict(&grid(11)) {
            assert!((p - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_training_point() {
        let x = DMatrix::from_row_slice(1, 2, &[0.3, -0.7]);
        let m = fit_kernel(&x, &[4.0], Bandwidth::Fixed(0.1)).unwrap();
        for p in m.predict(&grid(9)) {
            assert_eq!(p, 4.0);
        }
    }

    #[test]
    fn symmetric_pair_averages_at_midpoint() {
        let x = DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]);
        let m = fit_kernel(&x, &[0.0, 1.0], Bandwidth::Fixed(0.7)).unwrap();
        let p = m.predict(&DMatrix::from_element(1, 1, 0.0));
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bandwidth_limits() {
        let x = grid(17);
        let y: Vec<f64> = (0..17).map(|i| (i as f64).sin()).collect();
        let tiny = fit_kernel(&x, &y, Bandwidth::Fixed(1e-6)).unwrap();
        for (p, t) in tiny.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
        let huge = fit_kernel(&x, &y, Bandwidth::Fixed(1e8)).unwrap();
        let m = mean(&y);
        for p in huge.predict(&grid(5)) {
            assert!((p - m).abs() < 1e-9);
        }
    }

    #[test]
    fn underflow_falls_back_to_nearest_point() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let m = fit_kernel(&x, &[10.0, 20.0, 30.0], Bandwidth::Fixed(1e-3)).unwrap();
        let p = m.predict(&DMatrix::from_column_slice(2, 1, &[0.9, 1.6]));
        assert_eq!(p, vec![20.0, 30.0]);
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        let x = grid(4);
        assert!(fit_kernel(&x, &[0.0; 4], Bandwidth::Fixed(0.0)).is_err());
        assert!(fit_kernel(&x, &[0.0; 4], Bandwidth::Fixed(-1.0)).is_err());
    }

    #[test]
    fn constant_column_is_ignored_under_auto() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit_kernel(&x, &y, Bandwidth::Auto).unwrap();
        assert!(m.bandwidths[0].is_infinite());
        assert!(m.predict(&x).iter().all(|p| p.is_finite()));
    }
}
