use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::expit;

/// Attempts made to realize both treatment arms before giving up.
pub const MAX_ARM_RETRIES: u64 = 100;

fn one() -> f64 {
    1.0
}

/// Linear outcome, logistic treatment, standard normal covariates.
///
/// `Y = b₀ + τT + bᵀX + σε`, `P(T=1|X) = expit(α₀ + αᵀX)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGaussian {
    pub tau: f64,
    pub outcome_coefs: Vec<f64>,
    pub treatment_coefs: Vec<f64>,
    #[serde(default)]
    pub outcome_intercept: f64,
    #[serde(default)]
    pub treatment_intercept: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
    /// Independent standard normal columns unrelated to `T` and `Y`.
    #[serde(default)]
    pub noise_columns: usize,
}

/// M-structure `T ← U₁ → C ← U₂ → Y` with a probit treatment.
///
/// `C = a₁U₁ + b₁U₂ + σ_C ε_C`, `T = 1{a₂U₁ + ε_T > 0}`, `Y = τT + b₂U₂ + σ_Y ε_Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MBias {
    #[serde(default = "one")]
    pub tau: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default = "one")]
    pub sd_c: f64,
    #[serde(default = "one")]
    pub sd_y: f64,
    #[serde(default)]
    pub noise_columns: usize,
}

/// Observed `X ~ U(−1,1)^d` plus a hidden `U ~ N(0,1)` driving both arms.
///
/// `T = 1{α₀ + αᵀX + λ_T U + ε_T > 0}`, `Y = τT + bᵀX + λ_Y U + σε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnmeasuredConfounder {
    pub tau: f64,
    pub outcome_coefs: Vec<f64>,
    pub treatment_coefs: Vec<f64>,
    #[serde(default)]
    pub treatment_intercept: f64,
    pub lambda_t: f64,
    pub lambda_y: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
    #[serde(default)]
    pub noise_columns: usize,
}

/// Smooth nonlinear nuisances on `X ~ U(−1,1)^d` with constant effect.
///
/// `μ₀(x) = A d^{−1/2} Σ sin(ω x_j)`, `μ₁ = μ₀ + τ`,
/// `π(x) = expit(A_π d^{−1/2} Σ sin(ω_π x_j))`. Larger frequencies make the
/// functions rougher at a fixed sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothNonparam {
    pub d: usize,
    pub tau: f64,
    #[serde(default = "one")]
    pub amplitude_mu: f64,
    #[serde(default = "one")]
    pub frequency_mu: f64,
    #[serde(default = "one")]
    pub amplitude_pi: f64,
    #[serde(default = "one")]
    pub frequency_pi: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
    #[serde(default)]
    pub noise_columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DgpSpec {
    LinearGaussian(LinearGaussian),
    MBias(MBias),
    UnmeasuredConfounder(UnmeasuredConfounder),
    SmoothNonparam(SmoothNonparam),
}

/// One sample from a DGP including both potential outcomes.
#[derive(Debug, Clone)]
pub struct Draw {
    pub covariates: DMatrix<f64>,
    pub treatment: Vec<u8>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl Draw {
    pub fn observed_outcome(&self) -> Vec<f64> {
        self.treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t == 1 { self.y1[i] } else { self.y0[i] })
            .collect()
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::invalid(name, format!("non-finite value {v}"))),
        None => Ok(()),
    }
}

fn check_sd(name: &str, v: f64, strict: bool) -> Result<()> {
    if !v.is_finite() || v < 0.0 || (strict && v == 0.0) {
        let want = if strict { "> 0" } else { "≥ 0" };
        return Err(Error::invalid(name, format!("must be finite and {want}, got {v}")));
    }
    Ok(())
}

fn numbered(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |j| format!("{prefix}{j}"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DgpSpec::LinearGaussian(p) => {
                if p.outcome_coefs.len() != p.treatment_coefs.len() {
                    return Err(Error::invalid(
                        "treatment_coefs",
                        format!("{} treatment coefficients for {} outcome coefficients", p.treatment_coefs.len(), p.outcome_coefs.len()),
                    ));
                }
                check_finite("outcome_coefs", &p.outcome_coefs)?;
                check_finite("treatment_coefs", &p.treatment_coefs)?;
                check_finite("tau", &[p.tau, p.outcome_intercept, p.treatment_intercept])?;
                check_sd("noise_sd", p.noise_sd, false)
            }
            DgpSpec::MBias(p) => {
                check_finite("m_bias coefficients", &[p.tau, p.a1, p.a2, p.b1, p.b2])?;
                check_sd("sd_c", p.sd_c, true)?;
                check_sd("sd_y", p.sd_y, false)
            }
            DgpSpec::UnmeasuredConfounder(p) => {
                if p.outcome_coefs.len() != p.treatment_coefs.len() {
                    return Err(Error::invalid(
                        "treatment_coefs",
                        format!("{} treatment coefficients for {} outcome coefficients", p.treatment_coefs.len(), p.outcome_coefs.len()),
                    ));
                }
                if p.outcome_coefs.is_empty() {
                    return Err(Error::invalid("outcome_coefs", "need at least one observed covariate"));
                }
                check_finite("outcome_coefs", &p.outcome_coefs)?;
                check_finite("treatment_coefs", &p.treatment_coefs)?;
                check_finite("confounder loadings", &[p.tau, p.treatment_intercept, p.lambda_t, p.lambda_y])?;
                check_sd("noise_sd", p.noise_sd, false)
            }
            DgpSpec::SmoothNonparam(p) => {
                if p.d == 0 {
                    return Err(Error::invalid("d", "must be at least 1"));
                }
                check_finite(
                    "smooth_nonparam knobs",
                    &[p.tau, p.amplitude_mu, p.frequency_mu, p.amplitude_pi, p.frequency_pi],
                )?;
                check_sd("noise_sd", p.noise_sd, false)
            }
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            DgpSpec::LinearGaussian(_) => "linear_gaussian",
            DgpSpec::MBias(_) => "m_bias",
            DgpSpec::UnmeasuredConfounder(_) => "unmeasured_confounder",
            DgpSpec::SmoothNonparam(_) => "smooth_nonparam",
        }
    }

    /// Covariates that carry signal (`V`); the collider `c` for m_bias.
    pub fn signal_names(&self) -> Vec<String> {
        match self {
            DgpSpec::LinearGaussian(p) => numbered("x", p.outcome_coefs.len()).collect(),
            DgpSpec::MBias(_) => vec!["c".to_string()],
            DgpSpec::UnmeasuredConfounder(p) => numbered("x", p.outcome_coefs.len()).collect(),
            DgpSpec::SmoothNonparam(p) => numbered("x", p.d).collect(),
        }
    }

    pub fn noise_columns(&self) -> usize {
        match self {
            DgpSpec::LinearGaussian(p) => p.noise_columns,
            DgpSpec::MBias(p) => p.noise_columns,
            DgpSpec::UnmeasuredConfounder(p) => p.noise_columns,
            DgpSpec::SmoothNonparam(p) => p.noise_columns,
        }
    }

    /// Independent noise covariates (`W`), named `w1, w2, …`.
    pub fn noise_names(&self) -> Vec<String> {
        numbered("w", self.noise_columns()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = self.signal_names();
        names.extend(self.noise_names());
        names
    }

    pub fn d(&self) -> usize {
        self.signal_names().len() + self.noise_columns()
    }

    /// Indices of covariates that are colliders.
    pub fn collider_indices(&self) -> Vec<usize> {
        match self {
            DgpSpec::MBias(_) => vec![0],
            _ => Vec::new(),
        }
    }

    /// Draws `n` units row by row from a generator seeded with `seed`.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Draw> {
        self.validate()?;
        let mut rng = seeds::rng(seed);
        let signal = self.signal_names().len();
        let noise = self.noise_columns();
        let d = signal + noise;
        let mut x = DMatrix::zeros(n, d);
        let mut treatment = Vec::with_capacity(n);
        let mut y0 = Vec::with_capacity(n);
        let mut y1 = Vec::with_capacity(n);
        let mut row = vec![0.0; signal];
        for i in 0..n {
            let (t, f0, f1) = match self {
                DgpSpec::LinearGaussian(p) => {
                    row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let pi = expit(p.treatment_intercept + dot(&p.treatment_coefs, &row));
                    let t = rng.random::<f64>() < pi;
                    let base = p.outcome_intercept + dot(&p.outcome_coefs, &row);
                    let e: f64 = rng.sample(StandardNormal);
                    (t, base + p.noise_sd * e, base + p.tau + p.noise_sd * e)
                }
                DgpSpec::MBias(p) => {
                    let u1: f64 = rng.sample(StandardNormal);
                    let u2: f64 = rng.sample(StandardNormal);
                    let ec: f64 = rng.sample(StandardNormal);
                    let et: f64 = rng.sample(StandardNormal);
                    let ey: f64 = rng.sample(StandardNormal);
                    row[0] = p.a1 * u1 + p.b1 * u2 + p.sd_c * ec;
                    let base = p.b2 * u2 + p.sd_y * ey;
                    (p.a2 * u1 + et > 0.0, base, base + p.tau)
                }
                DgpSpec::UnmeasuredConfounder(p) => {
                    row.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                    let u: f64 = rng.sample(StandardNormal);
                    let et: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    let t = p.treatment_intercept + dot(&p.treatment_coefs, &row) + p.lambda_t * u + et > 0.0;
                    let base = dot(&p.outcome_coefs, &row) + p.lambda_y * u + p.noise_sd * e;
                    (t, base, base + p.tau)
                }
                DgpSpec::SmoothNonparam(p) => {
                    row.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                    let pi = smooth_pi(p, &row);
                    let t = rng.random::<f64>() < pi;
                    let e: f64 = rng.sample(StandardNormal);
                    let base = smooth_mu0(p, &row) + p.noise_sd * e;
                    (t, base, base + p.tau)
                }
            };
            for (j, v) in row.iter().enumerate() {
                x[(i, j)] = *v;
            }
            for j in signal..d {
                x[(i, j)] = rng.sample(StandardNormal);
            }
            treatment.push(t as u8);
            y0.push(f0);
            y1.push(f1);
        }
        Ok(Draw { covariates: x, treatment, y0, y1 })
    }
}

pub(crate) fn smooth_mu0(p: &SmoothNonparam, x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| (p.frequency_mu * v).sin()).sum();
    p.amplitude_mu * s / (x.len() as f64).sqrt()
}

pub(crate) fn smooth_pi(p: &SmoothNonparam, x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| (p.frequency_pi * v).sin()).sum();
    expit(p.amplitude_pi * s / (x.len() as f64).sqrt())
}
