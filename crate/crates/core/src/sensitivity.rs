//! Intervals for the causal effect `β*` when unconfoundedness may fail.
//!
//! With the bias function `γ(x, t) = E{Y(t) | X = x, T = 1} − E{Y(t) | X = x, T = 0}`
//! the causal effect decomposes as `β* = β − E{γ(X, 1 − T)}`, and `γ ≡ 0`
//! under unconfoundedness. Bounding `γ` per arm brackets the expectation and
//! hence `β*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EffectEstimate, Z_CRIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasSign {
    Nonnegative,
    Nonpositive,
}

/// Assumption on the confounding bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasBound {
    /// `|γ(x, t)| ≤ δ`.
    Symmetric { delta: f64 },
    /// `γ(·, 0) ∈ [l₀, u₀]` and `γ(·, 1) ∈ [l₁, u₁]`.
    PerArm { gamma0: (f64, f64), gamma1: (f64, f64) },
    /// Known sign with magnitude capped at `cap`.
    Sign { sign: BiasSign, cap: f64 },
}

impl BiasBound {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite"))
            }
        };
        match *self {
            BiasBound::Symmetric { delta } => {
                finite(delta, "delta")?;
                if delta < 0.0 {
                    return Err(Error::invalid("delta", format!("must be ≥ 0, got {delta}")));
                }
            }
            BiasBound::PerArm { gamma0, gamma1 } => {
                for (name, (l, u)) in [("gamma0", gamma0), ("gamma1", gamma1)] {
                    finite(l, name)?;
                    finite(u, name)?;
                    if l > u {
                        return Err(Error::invalid(name, format!("lower {l} exceeds upper {u}")));
                    }
                }
            }
            BiasBound::Sign { cap, .. } => {
                finite(cap, "cap")?;
                if !(cap > 0.0) {
                    return Err(Error::invalid("cap", format!("sign bounds need a cap M > 0, got {cap}")));
                }
            }
        }
        Ok(())
    }

    /// `((l₀, u₀), (l₁, u₁))`.
    pub fn arm_ranges(&self) -> ((f64, f64), (f64, f64)) {
        match *self {
            BiasBound::Symmetric { delta } => ((-delta, delta), (-delta, delta)),
            BiasBound::PerArm { gamma0, gamma1 } => (gamma0, gamma1),
            BiasBound::Sign { sign: BiasSign::Nonnegative, cap } => ((0.0, cap), (0.0, cap)),
            BiasBound::Sign { sign: BiasSign::Nonpositive, cap } => ((-cap, 0.0), (-cap, 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInterval {
    pub lower: f64,
    pub upper: f64,
    pub beta_point: f64,
    pub beta_se: f64,
    pub p1_hat: f64,
    /// Bracket on `E{γ(X, 1 − T)}`.
    pub bias_bracket: (f64, f64),
    pub bound: BiasBound,
}

/// Interval for `β*` from an estimate of `β`, a bias bound and the treated
/// fraction `p₁`. Treated units contribute `γ(·, 0)` and controls `γ(·, 1)`,
/// so `E{γ(X, 1 − T)} ∈ [p₁l₀ + (1 − p₁)l₁, p₁u₀ + (1 − p₁)u₁]`.
pub fn bound_effect(est: &EffectEstimate, bound: &BiasBound, p1_hat: f64) -> Result<SensitivityInterval> {
    bound.validate()?;
    if !(0.0..=1.0).contains(&p1_hat) {
        return Err(Error::invalid("p1", format!("treated fraction must lie in [0, 1], got {p1_hat}")));
    }
    let ((l0, u0), (l1, u1)) = bound.arm_ranges();
    let lo = p1_hat * l0 + (1.0 - p1_hat) * l1;
    let hi = p1_hat * u0 + (1.0 - p1_hat) * u1;
    Ok(SensitivityInterval {
        lower: est.point - hi,
        upper: est.point - lo,
        beta_point: est.point,
        beta_se: est.se,
        p1_hat,
        bias_bracket: (lo, hi),
        bound: *bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TippingPoint {
    /// Smallest grid δ with `0 ∈ [β̂ − δ, β̂ + δ]`.
    pub point: Option<f64>,
    /// Smallest grid δ with `0 ∈ [β̂ − 1.96·se − δ, β̂ + 1.96·se + δ]`.
    pub ci_adjusted: Option<f64>,
    pub grid: Vec<f64>,
}

pub fn tipping_point(est: &EffectEstimate, delta_grid: &[f64]) -> Result<TippingPoint> {
    if delta_grid.is_empty() {
        return Err(Error::invalid("delta_grid", "grid is empty"));
    }
    if delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::invalid("delta_grid", "entries must be finite and nonnegative"));
    }
    if delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("delta_grid", "grid must be strictly increasing"));
    }
    let first = |margin: f64| {
        delta_grid.iter().copied().find(|&delta| {
            let lo = est.point - margin - delta;
            let hi = est.point + margin + delta;
            lo <= 0.0 && 0.0 <= hi
        })
    };
    Ok(TippingPoint {
        point: first(0.0),
        ci_adjusted: first(Z_CRIT * est.se),
        grid: delta_grid.to_vec(),
    })
}
