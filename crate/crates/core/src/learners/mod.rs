//! Nuisance learners for the outcome regressions `μ_t(x) = E(Y | X = x, T = t)`
//! and the propensity score `π(x) = P(T = 1 | X = x)`.
//!
//! A [`Learner`] turns a training sample into a [`FittedModel`]. Learners are
//! described in configuration by short strings, see [`LearnerSpec`].

mod kernel;
mod linear;
mod logistic;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kernel::{fit_kernel, Bandwidth, KernelModel};
pub use linear::{fit_linear, LinearModel};
pub use logistic::{fit_logistic, LogisticModel};
pub use oracle::{make_perturbed_oracle, OracleLearner, OracleModel, Perturbation};

/// Which nuisance function a fit is estimating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// `μ_t`, fitted on the units with `T = t`.
    Outcome(u8),
    /// `π`, fitted on all units with `y = T`.
    Propensity,
}

/// Training sample handed to [`Learner::fit`].
#[derive(Clone, Copy)]
pub struct FitInput<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    /// Covariate labels of the columns of `x`.
    pub columns: &'a [String],
    pub role: Role,
}

pub trait FittedModel: Send + Sync {
    /// One prediction per row of `x`.
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64>;

    fn training_rows(&self) -> usize;
}

pub trait Learner: Send + Sync {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>>;

    fn describe(&self) -> String;
}

/// A known nuisance function evaluated on one covariate row.
pub type TruthFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Source of true nuisance functions, supplied by simulation ground truth.
///
/// `columns` names the covariates actually passed to the learner, so the
/// truth can depend on which adjustment set is in use.
pub trait NuisanceTruth: Send + Sync {
    fn outcome_fn(&self, arm: u8, columns: &[String]) -> Result<TruthFn>;
    fn propensity_fn(&self, columns: &[String]) -> Result<TruthFn>;
}

/// Learner selection as it appears in configuration files and CLI flags:
/// `linear`, `logistic`, `mean`, `kernel(bw=AUTO)`, `kernel(bw=0.3)`,
/// `oracle(r=0.25,c=1.0)` or `oracle(r=0.25,c=1.0,seed=7)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LearnerSpec {
    Linear,
    Logistic,
    /// Intercept-only fit; a deliberately misspecified baseline.
    Mean,
    Kernel(Bandwidth),
    Oracle { rate: f64, amplitude: f64, seed: u64 },
}

impl LearnerSpec {
    pub fn needs_truth(&self) -> bool {
        matches!(self, LearnerSpec::Oracle { .. })
    }

    pub fn build(&self, truth: Option<Arc<dyn NuisanceTruth>>) -> Result<Box<dyn Learner>> {
        Ok(match *self {
            LearnerSpec::Linear => Box::new(LinearLearner),
            LearnerSpec::Logistic => Box::new(LogisticLearner),
            LearnerSpec::Mean => Box::new(MeanLearner),
            LearnerSpec::Kernel(bw) => Box::new(KernelLearner { bandwidth: bw }),
            LearnerSpec::Oracle { rate, amplitude, seed } => {
                let truth = truth.ok_or_else(|| {
                    Error::invalid(
                        "learner",
                        "oracle learners need simulation ground truth and cannot run on external data",
                    )
                })?;
                Box::new(make_perturbed_oracle(truth, rate, amplitude, seed)?)
            }
        })
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Linear => write!(f, "linear"),
            LearnerSpec::Logistic => write!(f, "logistic"),
            LearnerSpec::Mean => write!(f, "mean"),
            LearnerSpec::Kernel(Bandwidth::Auto) => write!(f, "kernel(bw=AUTO)"),
            LearnerSpec::Kernel(Bandwidth::Fixed(h)) => write!(f, "kernel(bw={h})"),
            LearnerSpec::Oracle { rate, amplitude, seed } => {
                write!(f, "oracle(r={rate},c={amplitude},seed={seed})")
            }
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::invalid("learner", format!("`{s}`: {why}"));
        let (head, args) = match s.find('(') {
            Some(open) => {
                let close = s.strip_suffix(')').ok_or_else(|| bad("missing `)`"))?;
                (&s[..open], Some(&close[open + 1..]))
            }
            None => (s, None),
        };
        let kv: Vec<(String, String)> = match args {
            None => Vec::new(),
            Some(a) if a.trim().is_empty() => Vec::new(),
            Some(a) => a
                .split(',')
                .map(|p| {
                    let (k, v) = p.split_once('=').ok_or_else(|| bad("arguments must be key=value"))?;
                    Ok((k.trim().to_ascii_lowercase(), v.trim().to_string()))
                })
                .collect::<Result<_>>()?,
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad("numeric argument expected"));
        match head.trim().to_ascii_lowercase().as_str() {
            "linear" | "logistic" | "mean" if !kv.is_empty() => Err(bad("takes no arguments")),
            "linear" => Ok(LearnerSpec::Linear),
            "logistic" => Ok(LearnerSpec::Logistic),
            "mean" => Ok(LearnerSpec::Mean),
            "kernel" => {
                let mut bw = Bandwidth::Auto;
                for (k, v) in &kv {
                    match k.as_str() {
                        "bw" if v.eq_ignore_ascii_case("auto") => bw = Bandwidth::Auto,
                        "bw" => {
                            let h = num(v)?;
                            if !(h > 0.0 && h.is_finite()) {
                                return Err(bad("bandwidth must be positive"));
                            }
                            bw = Bandwidth::Fixed(h);
                        }
                        _ => return Err(bad("unknown argument")),
                    }
                }
                Ok(LearnerSpec::Kernel(bw))
            }
            "oracle" => {
                let (mut rate, mut amplitude, mut seed) = (None, None, 0u64);
                for (k, v) in &kv {
                    match k.as_str() {
                        "r" => rate = Some(num(v)?),
                        "c" => amplitude = Some(num(v)?),
                        "seed" => seed = v.parse().map_err(|_| bad("seed must be an integer"))?,
                        _ => return Err(bad("unknown argument")),
                    }
                }
                let rate = rate.ok_or_else(|| bad("missing r"))?;
                let amplitude = amplitude.ok_or_else(|| bad("missing c"))?;
                if !(rate >= 0.0 && amplitude >= 0.0) {
                    return Err(bad("r and c must be nonnegative"));
                }
                Ok(LearnerSpec::Oracle { rate, amplitude, seed })
            }
            _ => Err(bad("unknown learner")),
        }
    }
}

impl TryFrom<String> for LearnerSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LearnerSpec> for String {
    fn from(l: LearnerSpec) -> String {
        l.to_string()
    }
}

struct LinearLearner;

impl Learner for LinearLearner {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_linear(input.x, input.y)?))
    }
    fn describe(&self) -> String {
        LearnerSpec::Linear.to_string()
    }
}

struct LogisticLearner;

impl Learner for LogisticLearner {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_logistic(input.x, input.y)?))
    }
    fn describe(&self) -> String {
        LearnerSpec::Logistic.to_string()
    }
}

struct KernelLearner {
    bandwidth: Bandwidth,
}

impl Learner for KernelLearner {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_kernel(input.x, input.y, self.bandwidth)?))
    }
    fn describe(&self) -> String {
        LearnerSpec::Kernel(self.bandwidth).to_string()
    }
}

struct MeanLearner;

struct ConstantModel {
    value: f64,
    rows: usize,
}

impl FittedModel for ConstantModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        vec![self.value; x.nrows()]
    }
    fn training_rows(&self) -> usize {
        self.rows
    }
}

impl Learner for MeanLearner {
    fn fit(&self, input: FitInput<'_>) -> Result<Box<dyn FittedModel>> {
        if input.y.is_empty() {
            return Err(Error::Estimation("mean learner: zero training rows".into()));
        }
        Ok(Box::new(ConstantModel {
            value: crate::stats::mean(input.y),
            rows: input.y.len(),
        }))
    }
    fn describe(&self) -> String {
        LearnerSpec::Mean.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_strings() {
        assert_eq!("linear".parse::<LearnerSpec>().unwrap(), LearnerSpec::Linear);
        assert_eq!("logistic".parse::<LearnerSpec>().unwrap(), LearnerSpec::Logistic);
        assert_eq!(
            "kernel(bw=AUTO)".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::Kernel(Bandwidth::Auto)
        );
        assert_eq!(
            "kernel(bw=0.5)".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::Kernel(Bandwidth::Fixed(0.5))
        );
        assert_eq!(
            "oracle(r=0.25,c=1.0)".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::Oracle { rate: 0.25, amplitude: 1.0, seed: 0 }
        );
    }

    #[test]
    fn display_round_trips() {
        for s in ["linear", "logistic", "mean", "kernel(bw=AUTO)", "kernel(bw=0.25)", "oracle(r=0.25,c=1,seed=4)"] {
            let spec: LearnerSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<LearnerSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn rejects_malformed_strings() {
        for s in ["forest", "kernel(bw=-1)", "kernel(h=1)", "oracle(r=0.25)", "linear(x=1)", "kernel(bw=1"] {
            assert!(s.parse::<LearnerSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn oracle_without_truth_is_rejected() {
        let spec: LearnerSpec = "oracle(r=0,c=0)".parse().unwrap();
        assert!(spec.build(None).is_err());
    }
}
