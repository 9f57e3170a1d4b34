use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learners::{NuisanceTruth, TruthFn};
use crate::quadrature::{gauss_hermite, gauss_legendre};
use crate::stats::{expit, norm_cdf, norm_pdf};

use super::dgp::{smooth_mu0, smooth_pi, DgpSpec, MBias, UnmeasuredConfounder};

/// `φ(z) / Φ(z)` with an asymptotic tail far below zero.
pub(crate) fn mills(z: f64) -> f64 {
    if z > -35.0 {
        norm_pdf(z) / norm_cdf(z)
    } else {
        let a = -z;
        a + 1.0 / a - 2.0 / a.powi(3)
    }
}

/// Law of `(π, E[U₂|C,T=1], E[U₂|C,T=0])` at a collider value `C = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MBiasConditional {
    pub pi: f64,
    pub e1: f64,
    pub e0: f64,
}

impl MBiasConditional {
    pub fn mu(&self, p: &MBias, arm: u8) -> f64 {
        p.tau * arm as f64 + p.b2 * if arm == 1 { self.e1 } else { self.e0 }
    }
}

struct CondGaussian {
    m1: f64,
    m2: f64,
    v1: f64,
    v2: f64,
    c12: f64,
}

fn mbias_conditional_law(p: &MBias, c: f64) -> CondGaussian {
    let s2 = p.a1 * p.a1 + p.b1 * p.b1 + p.sd_c * p.sd_c;
    CondGaussian {
        m1: p.a1 * c / s2,
        m2: p.b1 * c / s2,
        v1: 1.0 - p.a1 * p.a1 / s2,
        v2: 1.0 - p.b1 * p.b1 / s2,
        c12: -p.a1 * p.b1 / s2,
    }
}

/// Closed form through the truncated-normal mean of `V = a₂U₁ + ε_T` given `C`.
pub fn mbias_closed_form(p: &MBias, c: f64) -> MBiasConditional {
    let g = mbias_conditional_law(p, c);
    let mv = p.a2 * g.m1;
    let sv = (p.a2 * p.a2 * g.v1 + 1.0).sqrt();
    let z = mv / sv;
    let k = p.a2 * g.c12 / sv;
    MBiasConditional { pi: norm_cdf(z), e1: g.m2 + k * mills(z), e0: g.m2 - k * mills(-z) }
}

/// Tensor Gauss–Hermite integration over `(U₁, U₂) | C = c`, integrating
/// `ε_T` exactly through `Φ(a₂U₁)`.
pub fn mbias_gauss_hermite(p: &MBias, c: f64, nodes: usize) -> MBiasConditional {
    let g = mbias_conditional_law(p, c);
    let l11 = g.v1.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { g.c12 / l11 } else { 0.0 };
    let l22 = (g.v2 - l21 * l21).max(0.0).sqrt();
    let rule = gauss_hermite(nodes);
    let (mut mass, mut first1, mut first0) = (0.0, 0.0, 0.0);
    for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
        let u1 = g.m1 + l11 * z1;
        let q = norm_cdf(p.a2 * u1);
        for (&z2, &w2) in rule.nodes.iter().zip(&rule.weights) {
            let u2 = g.m2 + l21 * z1 + l22 * z2;
            let w = w1 * w2;
            mass += w * q;
            first1 += w * u2 * q;
            first0 += w * u2 * (1.0 - q);
        }
    }
    MBiasConditional { pi: mass, e1: first1 / mass, e0: first0 / (1.0 - mass) }
}

/// Observed-data contrast when adjusting for the collider:
/// `E_C{μ₁(C) − μ₀(C)}` with `C ~ N(0, a₁² + b₁² + σ_C²)`.
pub fn mbias_adjusted_beta(p: &MBias, nodes: usize) -> f64 {
    let sc = (p.a1 * p.a1 + p.b1 * p.b1 + p.sd_c * p.sd_c).sqrt();
    gauss_hermite(nodes).integrate(|z| {
        let k = mbias_closed_form(p, sc * z);
        k.mu(p, 1) - k.mu(p, 0)
    })
}

fn uc_sigma_v(p: &UnmeasuredConfounder) -> f64 {
    (1.0 + p.lambda_t * p.lambda_t).sqrt()
}

/// `E[U | X, T=t]` as a function of the observed index `s = α₀ + αᵀx`.
pub fn uc_hidden_mean(p: &UnmeasuredConfounder, s: f64, arm: u8) -> f64 {
    let sv = uc_sigma_v(p);
    let z = s / sv;
    let k = p.lambda_t / sv;
    if arm == 1 {
        k * mills(z)
    } else {
        -k * mills(-z)
    }
}

/// `γ(x, t)` for both arms as a function of the index `s`.
pub fn uc_gamma(p: &UnmeasuredConfounder, s: f64) -> f64 {
    p.lambda_y * (uc_hidden_mean(p, s, 1) - uc_hidden_mean(p, s, 0))
}

fn uc_index_range(p: &UnmeasuredConfounder) -> (f64, f64) {
    let spread: f64 = p.treatment_coefs.iter().map(|a| a.abs()).sum();
    (p.treatment_intercept - spread, p.treatment_intercept + spread)
}

/// Mean of `f` under the uniform law on `[−1, 1]^d` by tensor Gauss–Legendre.
pub fn uniform_cube_mean(d: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let per_dim = ((2e5f64).powf(1.0 / d as f64).floor() as usize).clamp(4, 32);
    let rule = gauss_legendre(per_dim);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..d {
            x[j] = rule.nodes[idx[j]];
            w *= rule.weights[idx[j]] / 2.0;
        }
        acc += w * f(&x);
        let mut j = 0;
        loop {
            if j == d {
                return acc;
            }
            idx[j] += 1;
            if idx[j] < per_dim {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// True parameters and nuisance functions of a DGP.
///
/// Nuisances are conditional on whichever named columns a learner sees, so
/// the same truth serves every adjustment set the DGP can express in closed
/// form. Asking for a set it cannot express is an error.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    spec: DgpSpec,
    names: Vec<String>,
    beta_observed: OnceLock<f64>,
}

/// Serializable digest of a [`GroundTruth`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthSummary {
    pub beta_star: f64,
    pub beta_observed: f64,
    pub collider_indices: Vec<usize>,
}

const OUTER_NODES: usize = 80;

impl GroundTruth {
    pub fn new(spec: &DgpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(GroundTruth { spec: spec.clone(), names: spec.names(), beta_observed: OnceLock::new() })
    }

    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `β* = E{Y(1) − Y(0)}`.
    pub fn beta_star(&self) -> f64 {
        match &self.spec {
            DgpSpec::LinearGaussian(p) => p.tau,
            DgpSpec::MBias(p) => p.tau,
            DgpSpec::UnmeasuredConfounder(p) => p.tau,
            DgpSpec::SmoothNonparam(p) => p.tau,
        }
    }

    /// Observed-data contrast `β` adjusting for every generated covariate.
    pub fn beta_observed(&self) -> f64 {
        *self.beta_observed.get_or_init(|| match &self.spec {
            DgpSpec::MBias(p) => mbias_adjusted_beta(p, OUTER_NODES),
            DgpSpec::UnmeasuredConfounder(p) => {
                p.tau + uniform_cube_mean(p.treatment_coefs.len(), |x| uc_gamma(p, p.treatment_intercept + dot(&p.treatment_coefs, x)))
            }
            _ => self.beta_star(),
        })
    }

    pub fn collider_indices(&self) -> Vec<usize> {
        self.spec.collider_indices()
    }

    pub fn summary(&self) -> TruthSummary {
        TruthSummary {
            beta_star: self.beta_star(),
            beta_observed: self.beta_observed(),
            collider_indices: self.collider_indices(),
        }
    }

    /// Position in `columns` of each signal covariate, if present.
    fn locate(&self, columns: &[String]) -> Result<Vec<Option<usize>>> {
        if let Some(bad) = columns.iter().find(|c| !self.names.contains(c)) {
            return Err(Error::invalid(
                "columns",
                format!("`{bad}` is not a covariate of the {} DGP", self.spec.variant_name()),
            ));
        }
        Ok(self.spec.signal_names().iter().map(|s| columns.iter().position(|c| c == s)).collect())
    }

    fn require_all(&self, columns: &[String]) -> Result<Vec<usize>> {
        let pos = self.locate(columns)?;
        let signal = self.spec.signal_names();
        pos.iter()
            .zip(&signal)
            .map(|(p, name)| {
                p.ok_or_else(|| {
                    Error::invalid(
                        "columns",
                        format!(
                            "true nuisances of the {} DGP are unavailable without covariate `{name}`",
                            self.spec.variant_name()
                        ),
                    )
                })
            })
            .collect()
    }

    /// Observed-data contrast `β` for the adjustment set `columns`.
    pub fn beta_for(&self, columns: &[String]) -> Result<f64> {
        match &self.spec {
            DgpSpec::MBias(p) => Ok(if self.locate(columns)?[0].is_some() { self.beta_observed() } else { p.tau }),
            _ => {
                self.require_all(columns)?;
                Ok(self.beta_observed())
            }
        }
    }

    pub fn outcome(&self, arm: u8, columns: &[String]) -> Result<TruthFn> {
        let t = arm as f64;
        Ok(match &self.spec {
            DgpSpec::LinearGaussian(p) => {
                let pos = self.require_all(columns)?;
                let (b, b0, tau) = (p.outcome_coefs.clone(), p.outcome_intercept, p.tau);
                Arc::new(move |x: &[f64]| b0 + tau * t + pick_dot(&b, &pos, x))
            }
            DgpSpec::MBias(p) => {
                let p = p.clone();
                match self.locate(columns)?[0] {
                    Some(j) => Arc::new(move |x: &[f64]| mbias_closed_form(&p, x[j]).mu(&p, arm)),
                    None => Arc::new(move |_: &[f64]| p.tau * t),
                }
            }
            DgpSpec::UnmeasuredConfounder(p) => {
                let pos = self.require_all(columns)?;
                let p = p.clone();
                Arc::new(move |x: &[f64]| {
                    let s = p.treatment_intercept + pick_dot(&p.treatment_coefs, &pos, x);
                    p.tau * t + pick_dot(&p.outcome_coefs, &pos, x) + p.lambda_y * uc_hidden_mean(&p, s, arm)
                })
            }
            DgpSpec::SmoothNonparam(p) => {
                let pos = self.require_all(columns)?;
                let p = p.clone();
                Arc::new(move |x: &[f64]| {
                    let v: Vec<f64> = pos.iter().map(|&j| x[j]).collect();
                    smooth_mu0(&p, &v) + p.tau * t
                })
            }
        })
    }

    pub fn propensity(&self, columns: &[String]) -> Result<TruthFn> {
        Ok(match &self.spec {
            DgpSpec::LinearGaussian(p) => {
                let pos = self.require_all(columns)?;
                let (a, a0) = (p.treatment_coefs.clone(), p.treatment_intercept);
                Arc::new(move |x: &[f64]| expit(a0 + pick_dot(&a, &pos, x)))
            }
            DgpSpec::MBias(p) => {
                let p = p.clone();
                match self.locate(columns)?[0] {
                    Some(j) => Arc::new(move |x: &[f64]| mbias_closed_form(&p, x[j]).pi),
                    None => Arc::new(|_: &[f64]| 0.5),
                }
            }
            DgpSpec::UnmeasuredConfounder(p) => {
                let pos = self.require_all(columns)?;
                let p = p.clone();
                let sv = uc_sigma_v(&p);
                Arc::new(move |x: &[f64]| norm_cdf((p.treatment_intercept + pick_dot(&p.treatment_coefs, &pos, x)) / sv))
            }
            DgpSpec::SmoothNonparam(p) => {
                let pos = self.require_all(columns)?;
                let p = p.clone();
                Arc::new(move |x: &[f64]| {
                    let v: Vec<f64> = pos.iter().map(|&j| x[j]).collect();
                    smooth_pi(&p, &v)
                })
            }
        })
    }

    /// `γ(x, t) = E[Y(t)|X=x,T=1] − E[Y(t)|X=x,T=0]` given the columns.
    pub fn gamma(&self, arm: u8, columns: &[String]) -> Result<TruthFn> {
        let _ = arm;
        Ok(match &self.spec {
            DgpSpec::MBias(p) => {
                let p = p.clone();
                match self.locate(columns)?[0] {
                    Some(j) => Arc::new(move |x: &[f64]| {
                        let k = mbias_closed_form(&p, x[j]);
                        p.b2 * (k.e1 - k.e0)
                    }),
                    None => Arc::new(|_: &[f64]| 0.0),
                }
            }
            DgpSpec::UnmeasuredConfounder(p) => {
                let pos = self.require_all(columns)?;
                let p = p.clone();
                Arc::new(move |x: &[f64]| uc_gamma(&p, p.treatment_intercept + pick_dot(&p.treatment_coefs, &pos, x)))
            }
            _ => {
                self.require_all(columns)?;
                Arc::new(|_: &[f64]| 0.0)
            }
        })
    }

    /// Essential range of `γ(·, t)` over the covariate support.
    pub fn gamma_range(&self, arm: u8, columns: &[String]) -> Result<(f64, f64)> {
        let _ = arm;
        match &self.spec {
            DgpSpec::UnmeasuredConfounder(p) => {
                self.require_all(columns)?;
                let (lo, hi) = uc_index_range(p);
                // |γ| is smallest at s = 0 and grows with |s|
                let inner = uc_gamma(p, 0.0f64.clamp(lo, hi));
                let outer = if uc_gamma(p, lo).abs() > uc_gamma(p, hi).abs() { uc_gamma(p, lo) } else { uc_gamma(p, hi) };
                Ok((inner.min(outer), inner.max(outer)))
            }
            DgpSpec::MBias(p) => match self.locate(columns)?[0] {
                Some(_) if p.a1 * p.b1 * p.a2 * p.b2 != 0.0 => Err(Error::invalid(
                    "columns",
                    "γ given the collider is unbounded over its Gaussian support",
                )),
                _ => Ok((0.0, 0.0)),
            },
            _ => {
                self.require_all(columns)?;
                Ok((0.0, 0.0))
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pick_dot(coefs: &[f64], pos: &[usize], x: &[f64]) -> f64 {
    coefs.iter().zip(pos).map(|(c, &j)| c * x[j]).sum()
}

impl NuisanceTruth for GroundTruth {
    fn outcome_fn(&self, arm: u8, columns: &[String]) -> Result<TruthFn> {
        self.outcome(arm, columns)
    }

    fn propensity_fn(&self, columns: &[String]) -> Result<TruthFn> {
        self.propensity(columns)
    }
}
