use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{FitInput, FittedModel, Learner, LearnerSpec, NuisanceTruth, Role, TruthFn};
use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::{expit, logit};

const COMPONENTS: usize = 5;

/// Smooth seed-determined function `x ↦ Σ_k a_k sin(ω_k ⟨u, x⟩ + φ_k)` along a
/// random unit direction `u`.
///
/// Phases lie in `[0, π)` and frequencies in `[0.5, 1.5]`, so on O(1)-scale
/// covariates the function has a clearly positive mean.
#[derive(Debug, Clone)]
pub struct Perturbation {
    direction: Vec<f64>,
    weights: [f64; COMPONENTS],
    freqs: [f64; COMPONENTS],
    phases: [f64; COMPONENTS],
}

impl Perturbation {
    pub fn new(seed: u64, d: usize) -> Self {
        let mut rng = seeds::rng(seed);
        let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            direction.iter_mut().for_each(|v| *v /= norm);
        }
        let mut weights = [0.0; COMPONENTS];
        let mut freqs = [0.0; COMPONENTS];
        let mut phases = [0.0; COMPONENTS];
        for k in 0..COMPONENTS {
            weights[k] = rng.random_range(0.5..1.5);
            freqs[k] = rng.random_range(0.5..1.5);
            phases[k] = rng.random_range(0.0..PI);
        }
        Perturbation { direction, weights, freqs, phases }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let proj: f64 = self.direction.iter().zip(x).map(|(u, v)| u * v).sum();
        (0..COMPONENTS)
            .map(|k| self.weights[k] * (self.freqs[k] * proj + self.phases[k]).sin())
            .sum()
    }

    /// Root mean square over the rows of `x`.
    pub fn l2_norm(&self, x: &DMatrix<f64>) -> f64 {
        let mut row = vec![0.0; x.ncols()];
        let ss: f64 = (0..x.nrows())
            .map(|i| {
                row.iter_mut().enumerate().for_each(|(j, v)| *v = x[(i, j)]);
                self.eval(&row).powi(2)
            })
            .sum();
        (ss / x.nrows().max(1) as f64).sqrt()
    }
}

/// Learner factory whose fits equal the truth plus `c · n^(−r) · g(x)`, with
/// `n` the training size and `g` a [`Perturbation`] normalized to unit
/// empirical L2 norm on the training sample.
///
/// Propensities are perturbed on the logit scale. Outcome perturbations for
/// arm 0 carry the opposite sign to arm 1 so the plugin contrast inherits the
/// full `n^(−r)` error instead of cancelling it.
pub struct OracleLearner {
    truth: Arc<dyn NuisanceTruth>,
    pub rate: f64,
    pub amplitude: f64,
    pub seed: u64,
}

pub fn make_perturbed_oracle(
    truth: Arc<dyn NuisanceTruth>,
    rate: f64,
    amplitude: f64,
    seed: u64,
) -> Result<OracleLearner> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid("r", format!("rate exponent must be ≥ 0, got {rate}")));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid("c", format!("amplitude must be ≥ 0, got {amplitude}")));
    }
    Ok(OracleLearner { truth, rate, amplitude, seed })
}

pub struct OracleModel {
    truth: TruthFn,
    perturbation: Perturbation,
    /// `±c · n^(−r) / ‖g‖_n`.
    scale: f64,
    logit_scale: bool,
    rows: usize,
}

impl OracleModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let f = (self.truth)(x);
        if self.scale == 0.0 {
            return f;
        }
        let delta = self.scale * self.perturbation.eval(x);
        if self.logit_scale {
            expit(logit(f) + delta)
        } else {
            f + delta
        }
    }
}

impl FittedModel for OracleModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut row = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|i| {
                row.iter_mut().enumerate().for_each(|(j, v)| *v = x[(i, j)]);
                self.predict_row(&row)
            })
            .collect()
    }

    fn training_rows(&self) -> usize {
        self.rows
    }
}

impl Learner for OracleLearner {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>> {
        let n = input.x.nrows();
        if n == 0 {
            return Err(Error::Estimation("oracle fit: zero rows".into()));
        }
        let (truth, stream, sign, logit_scale) = match input.role {
            Role::Outcome(arm) => (
                self.truth.outcome_fn(arm, input.columns)?,
                1 + arm as u64,
                if arm == 1 { 1.0 } else { -1.0 },
                false,
            ),
            Role::Propensity => (self.truth.propensity_fn(input.columns)?, 3, 1.0, true),
        };
        let perturbation = Perturbation::new(seeds::derive(self.seed, stream), input.x.ncols());
        let norm = perturbation.l2_norm(input.x);
        let norm = if norm > 0.0 { norm } else { 1.0 };
        let scale = sign * self.amplitude * (n as f64).powf(-self.rate) / norm;
        Ok(Box::new(OracleModel { truth, perturbation, scale, logit_scale, rows: n }))
    }

    fn describe(&self) -> String {
        LearnerSpec::Oracle { rate: self.rate, amplitude: self.amplitude, seed: self.seed }.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng;

    struct Zero;
    impl NuisanceTruth for Zero {
        fn outcome_fn(&self, _: u8, _: &[String]) -> Result<TruthFn> {
            Ok(Arc::new(|_| 0.0))
        }
        fn propensity_fn(&self, _: &[String]) -> Result<TruthFn> {
            Ok(Arc::new(|_| 0.5))
        }
    }

    fn sample(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        DMatrix::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0))
    }

    fn empirical_error(n: usize, rate: f64, eval: &DMatrix<f64>) -> f64 {
        let learner = make_perturbed_oracle(Arc::new(Zero), rate, 1.0, 11).unwrap();
        let x = sample(n, n as u64);
        let y = vec![0.0; n];
        let cols = vec!["x1".to_string(), "x2".to_string()];
        let model = learner
            .fit(FitInput { x: &x, y: &y, columns: &cols, role: Role::Outcome(1) })
            .unwrap();
        let p = model.predict(eval);
        (p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64).sqrt()
    }

    #[test]
    fn zero_amplitude_is_the_truth() {
        let learner = make_perturbed_oracle(Arc::new(Zero), 0.5, 0.0, 1).unwrap();
        let x = sample(50, 2);
        let cols = vec!["a".to_string(), "b".to_string()];
        let m = learner
            .fit(FitInput { x: &x, y: &[0.0; 50], columns: &cols, role: Role::Propensity })
            .unwrap();
        assert!(m.predict(&x).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn training_error_is_exactly_c_n_to_minus_r() {
        let x = sample(400, 5);
        let cols = vec!["a".to_string(), "b".to_string()];
        let learner = make_perturbed_oracle(Arc::new(Zero), 0.25, 2.0, 3).unwrap();
        let m = learner
            .fit(FitInput { x: &x, y: &[0.0; 400], columns: &cols, role: Role::Outcome(0) })
            .unwrap();
        let p = m.predict(&x);
        let rms = (p.iter().map(|v| v * v).sum::<f64>() / 400.0).sqrt();
        assert!((rms - 2.0 * 400f64.powf(-0.25)).abs() < 1e-12);
    }

    #[test]
    fn rate_zero_is_n_independent() {
        let eval = sample(50_000, 99);
        let a = empirical_error(100, 0.0, &eval);
        let b = empirical_error(10_000, 0.0, &eval);
        assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
    }

    #[test]
    fn quarter_rate_halves_error_over_sixteenfold_n() {
        // Oracle: L2 norms measured on an independent 200k-point evaluation sample.
        let eval = sample(200_000, 77);
        let ratio = empirical_error(16_000, 0.25, &eval) / empirical_error(1_000, 0.25, &eval);
        assert!((ratio / 0.5 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn propensity_predictions_stay_in_unit_interval() {
        let x = sample(20, 8);
        let cols = vec!["a".to_string(), "b".to_string()];
        let learner = make_perturbed_oracle(Arc::new(Zero), 0.0, 50.0, 3).unwrap();
        let m = learner
            .fit(FitInput { x: &x, y: &[0.0; 20], columns: &cols, role: Role::Propensity })
            .unwrap();
        assert!(m.predict(&x).iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
