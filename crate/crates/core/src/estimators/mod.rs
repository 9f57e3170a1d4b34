//! Estimators of the observed-data contrast `β = E{μ_1(X) − μ_0(X)}`.
//!
//! Nuisances are always cross-fitted ([`crossfit_nuisances`]); the estimators
//! then consume the stored out-of-fold predictions. [`estimate`] runs the full
//! pipeline from an [`EstimatorConfig`].

mod bootstrap;
mod crossfit;
mod methods;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, NuisanceTruth};

pub use bootstrap::{fold_preserving_resample, BootstrapMode, BootstrapSummary};
pub use crossfit::{clip_propensities, crossfit_nuisances, crossfit_with_folds};
pub use methods::{
    aipw_contributions, aipw_denominator, estimate_dr, estimate_ipw, estimate_plugin,
    estimate_psm_1nn, psm_point,
};

/// Critical value for the two-sided 95% Wald interval.
pub const Z_CRIT: f64 = 1.96;

/// Cross-fitted out-of-fold nuisance predictions for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceEstimates {
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    /// Clipped to `[ε, 1 − ε]`.
    pub pi_hat: Vec<f64>,
    pub clip_epsilon: f64,
    pub clipped_count: usize,
    pub folds: FoldAssignment,
    pub outcome_learner: String,
    pub propensity_learner: String,
}

impl NuisanceEstimates {
    pub fn n(&self) -> usize {
        self.pi_hat.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plugin,
    Ipw,
    Psm,
    Dr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Plugin => "plugin",
            Method::Ipw => "ipw",
            Method::Psm => "psm",
            Method::Dr => "dr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plugin" => Ok(Method::Plugin),
            "ipw" => Ok(Method::Ipw),
            "psm" => Ok(Method::Psm),
            "dr" | "aipw" => Ok(Method::Dr),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Point estimate with Wald interval `point ± 1.96 · se`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub method: Method,
    pub point: f64,
    pub se: f64,
    pub ci: [f64; 2],
    pub n: usize,
    pub clip_epsilon: f64,
    pub clipped_count: usize,
    pub folds: usize,
    pub seed: u64,
    /// Per-unit influence contributions; empty for bootstrap-based methods.
    #[serde(skip)]
    pub influence: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
}

impl EffectEstimate {
    pub(crate) fn new(method: Method, point: f64, se: f64, nuis: &NuisanceEstimates) -> Self {
        EffectEstimate {
            method,
            point,
            se,
            ci: [point - Z_CRIT * se, point + Z_CRIT * se],
            n: nuis.n(),
            clip_epsilon: nuis.clip_epsilon,
            clipped_count: nuis.clipped_count,
            folds: nuis.folds.k,
            seed: nuis.folds.seed,
            influence: Vec::new(),
            bootstrap: None,
        }
    }

    pub fn ci_lower(&self) -> f64 {
        self.ci[0]
    }

    pub fn ci_upper(&self) -> f64 {
        self.ci[1]
    }
}

fn default_outcome_learner() -> LearnerSpec {
    LearnerSpec::Kernel(crate::learners::Bandwidth::Auto)
}
fn default_propensity_learner() -> LearnerSpec {
    LearnerSpec::Logistic
}
fn default_folds() -> usize {
    5
}
fn default_clip() -> f64 {
    0.01
}
fn default_bootstrap() -> usize {
    200
}
fn default_method() -> Method {
    Method::Dr
}

/// Full estimator pipeline configuration. Every field has a default, so a
/// partial JSON object deserializes to a complete configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_outcome_learner")]
    pub outcome_learner: LearnerSpec,
    #[serde(default = "default_propensity_learner")]
    pub propensity_learner: LearnerSpec,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_clip")]
    pub clip_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_replicates: usize,
    #[serde(default)]
    pub bootstrap_mode: BootstrapMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: default_method(),
            outcome_learner: default_outcome_learner(),
            propensity_learner: default_propensity_learner(),
            folds: default_folds(),
            clip_epsilon: default_clip(),
            seed: 0,
            bootstrap_replicates: default_bootstrap(),
            bootstrap_mode: BootstrapMode::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("folds", format!("need at least 2, got {}", self.folds)));
        }
        if !(0.0..0.5).contains(&self.clip_epsilon) {
            return Err(Error::invalid("clip", format!("must lie in [0, 0.5), got {}", self.clip_epsilon)));
        }
        if matches!(self.method, Method::Plugin | Method::Psm) && self.bootstrap_replicates < 2 {
            return Err(Error::invalid(
                "bootstrap",
                format!("{} needs at least 2 bootstrap replicates", self.method),
            ));
        }
        Ok(())
    }
}

/// Cross-fits the nuisances and applies the configured estimator. Plugin and
/// matching standard errors come from the configured bootstrap.
pub fn estimate(
    ds: &Dataset,
    cfg: &EstimatorConfig,
    truth: Option<Arc<dyn NuisanceTruth>>,
) -> Result<EffectEstimate> {
    cfg.validate()?;
    let outcome = cfg.outcome_learner.build(truth.clone())?;
    let propensity = cfg.propensity_learner.build(truth)?;
    let nuis = crossfit_nuisances(ds, outcome.as_ref(), propensity.as_ref(), cfg.folds, cfg.clip_epsilon, cfg.seed)?;
    let point_only = |d: &Dataset, nu: &NuisanceEstimates| -> Result<f64> {
        match cfg.method {
            Method::Plugin => Ok(methods::plugin_point(nu)),
            Method::Psm => psm_point(d.treatment(), d.outcome(), &nu.pi_hat),
            Method::Ipw => Ok(estimate_ipw(d, nu)?.point),
            Method::Dr => Ok(estimate_dr(d, nu)?.point),
        }
    };
    match cfg.method {
        Method::Dr => estimate_dr(ds, &nuis),
        Method::Ipw => estimate_ipw(ds, &nuis),
        Method::Plugin | Method::Psm => {
            let boot_seed = crate::seeds::derive(cfg.seed, 0xb007);
            let point = point_only(ds, &nuis)?;
            let (se, summary) = match cfg.bootstrap_mode {
                BootstrapMode::NoRefit => bootstrap::no_refit(ds, &nuis, cfg.bootstrap_replicates, boot_seed, &point_only)?,
                BootstrapMode::Refit => bootstrap::refit(
                    ds,
                    &nuis.folds,
                    outcome.as_ref(),
                    propensity.as_ref(),
                    cfg.clip_epsilon,
                    cfg.bootstrap_replicates,
                    boot_seed,
                    &point_only,
                )?,
            };
            let mut est = EffectEstimate::new(cfg.method, point, se, &nuis);
            est.bootstrap = Some(summary);
            Ok(est)
        }
    }
}
