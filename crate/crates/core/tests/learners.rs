use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use drbounds::learners::{fit_kernel, fit_linear, fit_logistic, Bandwidth, FitInput, LearnerSpec, NuisanceTruth, Role, TruthFn};
use drbounds::seeds;
use drbounds::simlab::fit_rate_slope;
use drbounds::Result;

fn sample(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = seeds::rng(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)].sin() + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let t: Vec<f64> = (0..n).map(|i| (rng.random::<f64>() < 1.0 / (1.0 + (-x[(i, 0)]).exp())) as u8 as f64).collect();
    (x, y, t)
}

struct Smooth;

impl NuisanceTruth for Smooth {
    fn outcome_fn(&self, _: u8, _: &[String]) -> Result<TruthFn> {
        Ok(Arc::new(|x: &[f64]| x[0].sin()))
    }
    fn propensity_fn(&self, _: &[String]) -> Result<TruthFn> {
        Ok(Arc::new(|x: &[f64]| 1.0 / (1.0 + (-x[0]).exp())))
    }
}

#[test]
fn every_learner_refits_identically() {
    let (x, y, t) = sample(300, 2, 1);
    let cols = vec!["a".to_string(), "b".to_string()];
    let truth: Arc<dyn NuisanceTruth> = Arc::new(Smooth);
    let specs = [
        "linear",
        "logistic",
        "mean",
        "kernel(bw=AUTO)",
        "kernel(bw=0.4)",
        "oracle(r=0.25,c=1,seed=3)",
    ];
    for s in specs {
        let spec: LearnerSpec = s.parse().unwrap();
        let (target, role) = if s == "logistic" { (&t, Role::Propensity) } else { (&y, Role::Outcome(1)) };
        let fit = |_: ()| {
            let learner = spec.build(Some(truth.clone())).unwrap();
            learner.fit(FitInput { x: &x, y: target, columns: &cols, role }).unwrap().predict(&x)
        };
        assert_eq!(fit(()), fit(()), "{s}");
    }
}

#[test]
fn kernel_bandwidth_limits() {
    let (x, y, _) = sample(60, 2, 2);
    let tiny = fit_kernel(&x, &y, Bandwidth::Fixed(1e-6)).unwrap();
    let p = tiny.predict_row(&x.row(7).iter().copied().collect::<Vec<_>>());
    assert!((p - y[7]).abs() < 1e-9);
    let huge = fit_kernel(&x, &y, Bandwidth::Fixed(1e9)).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!((huge.predict_row(&[0.3, -2.0]) - mean).abs() < 1e-9);
}

#[test]
fn logistic_and_linear_agree_in_sign() {
    // well-separated Gaussian classes with mean shift (1, −1, 0.5)
    let mut rng = seeds::rng(5);
    let n = 2000;
    let shift = [1.0, -1.0, 0.5];
    let t: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let x = DMatrix::from_fn(n, 3, |i, j| rng.sample::<f64, _>(StandardNormal) + t[i] * shift[j]);
    let logit = fit_logistic(&x, &t).unwrap();
    let lin = fit_linear(&x, &t).unwrap();
    for j in 0..3 {
        let (a, b) = (logit.coefficients[j + 1], lin.coefficients[j + 1]);
        assert!(a * b > 0.0 && a.signum() == shift[j].signum(), "coef {j}: {a} vs {b}");
    }
}

#[test]
fn perturbed_oracle_error_slope_matches_rate() {
    let rate = 0.3;
    let learner = LearnerSpec::Oracle { rate, amplitude: 1.0, seed: 9 }.build(Some(Arc::new(Smooth))).unwrap();
    let cols = vec!["a".to_string(), "b".to_string()];
    let (eval, _, _) = sample(20_000, 2, 99);
    let truth: Vec<f64> = (0..eval.nrows()).map(|i| eval[(i, 0)].sin()).collect();
    let points: Vec<(f64, f64)> = [500usize, 2000, 8000, 32000]
        .iter()
        .map(|&n| {
            let (x, y, _) = sample(n, 2, n as u64);
            let model = learner.fit(FitInput { x: &x, y: &y, columns: &cols, role: Role::Outcome(1) }).unwrap();
            let pred = model.predict(&eval);
            let mse = pred.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64;
            (n as f64, mse.sqrt())
        })
        .collect();
    let slope = fit_rate_slope(&points).unwrap().slope;
    assert!((slope + rate).abs() <= 0.05, "slope {slope}");
}
