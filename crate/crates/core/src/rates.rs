//! Convergence-rate exponents for Hölder-smooth nuisances and the
//! second-order remainder product.
//!
//! With `π` of smoothness `α` and `μ_t` of smoothness `ζ` in dimension `d`,
//! nuisance errors of order `n^(−α/(2α+d))` and `n^(−ζ/(2ζ+d))` give the
//! doubly robust estimator the rate `n^(−ξ)` with
//! `ξ = min(α/(2α+d) + ζ/(2ζ+d), 1/2)`.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Smoothness above which [`holder_rate`] reports the `1/2` supremum.
pub const SMOOTHNESS_LIMIT: f64 = 1e12;

/// A number kept as an exact rational when possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Real {
    Exact(Ratio<i64>),
    Approx(f64),
}

impl Real {
    pub fn int(v: i64) -> Self {
        Real::Exact(Ratio::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Real::Exact(Ratio::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Real::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Real::Approx(v) => v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    /// Parses integers, fractions `a/b` and finite decimals exactly; anything
    /// else (exponent notation, overlong decimals) becomes a float.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid("number", format!("cannot parse `{s}`"));
        if let Some((a, b)) = s.split_once('/') {
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            return Ok(Real::ratio(a, b));
        }
        let exact = (|| {
            let (neg, body) = match s.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, s.strip_prefix('+').unwrap_or(s)),
            };
            let (int, frac) = body.split_once('.').unwrap_or((body, ""));
            if int.is_empty() && frac.is_empty() {
                return None;
            }
            if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
                return None;
            }
            let den = 10i64.checked_pow(frac.len() as u32)?;
            let digits = format!("{int}{frac}");
            let num: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
            let r = Ratio::new(num, den);
            Some(if neg { -r } else { r })
        })();
        match exact {
            Some(r) => Ok(Real::Exact(r)),
            None => s.parse::<f64>().map(Real::Approx).map_err(|_| bad()),
        }
    }

    fn combine(
        self,
        other: Real,
        exact: impl Fn(Ratio<i64>, Ratio<i64>) -> Option<Ratio<i64>>,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Real {
        if let (Real::Exact(a), Real::Exact(b)) = (self, other) {
            if let Some(r) = exact(a, b) {
                return Real::Exact(r);
            }
        }
        Real::Approx(approx(self.to_f64(), other.to_f64()))
    }

    pub fn add(self, o: Real) -> Real {
        self.combine(o, |a, b| a.checked_add(&b), |a, b| a + b)
    }

    pub fn mul(self, o: Real) -> Real {
        self.combine(o, |a, b| a.checked_mul(&b), |a, b| a * b)
    }

    pub fn div(self, o: Real) -> Real {
        self.combine(o, |a, b| a.checked_div(&b), |a, b| a / b)
    }

    pub fn min(self, o: Real) -> Real {
        if self.le(o) { self } else { o }
    }

    pub fn le(self, o: Real) -> bool {
        match (self, o) {
            (Real::Exact(a), Real::Exact(b)) => a <= b,
            _ => self.to_f64() <= o.to_f64(),
        }
    }

    pub fn is_positive(self) -> bool {
        match self {
            Real::Exact(r) => *r.numer() > 0,
            Real::Approx(v) => v > 0.0 && v.is_finite(),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Real::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Real::Approx(v) => write!(f, "{v}"),
        }
    }
}

/// Serialized as `{"value": <float>, "exact": "<a/b>" | null}`.
impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Real", 2)?;
        st.serialize_field("value", &self.to_f64())?;
        st.serialize_field("exact", &self.is_exact().then(|| self.to_string()))?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub alpha: Real,
    pub zeta: Real,
    pub d: u32,
}

impl RateInputs {
    pub fn new(alpha: Real, zeta: Real, d: u32) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("zeta", zeta)] {
            if !v.is_positive() {
                return Err(Error::invalid(name, format!("smoothness must be positive, got {v}")));
            }
        }
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        Ok(RateInputs { alpha, zeta, d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderRate {
    pub exponent: Real,
    /// Smoothness beyond [`SMOOTHNESS_LIMIT`]; `exponent` is the supremum 1/2.
    pub at_limit: bool,
}

/// `s / (2s + d)`, the attainable L2 exponent for smoothness `s` in dimension `d`.
pub fn holder_rate(s: Real, d: u32) -> Result<HolderRate> {
    if !s.is_positive() {
        return Err(Error::invalid("smoothness", format!("must be positive, got {s}")));
    }
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    if s.to_f64() > SMOOTHNESS_LIMIT {
        return Ok(HolderRate { exponent: Real::ratio(1, 2), at_limit: true });
    }
    let two_s_plus_d = Real::int(2).mul(s).add(Real::int(d as i64));
    Ok(HolderRate { exponent: s.div(two_s_plus_d), at_limit: false })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateExponent {
    pub xi: Real,
    /// `[α/(2α+d), ζ/(2ζ+d)]`.
    pub terms: [Real; 2],
    /// The uncapped sum reaches 1/2.
    pub in_root_n_regime: bool,
}

pub fn minimax_rate_exponent(inp: &RateInputs) -> Result<RateExponent> {
    let a = holder_rate(inp.alpha, inp.d)?.exponent;
    let z = holder_rate(inp.zeta, inp.d)?.exponent;
    let sum = a.add(z);
    let half = Real::ratio(1, 2);
    Ok(RateExponent { xi: sum.min(half), terms: [a, z], in_root_n_regime: half.le(sum) })
}

/// `‖μ̂ − μ‖ · ‖π̂ − π‖`, the variable part of the remainder bound.
pub fn remainder_bound(mu_err: f64, pi_err: f64) -> Result<f64> {
    for (name, v) in [("mu_err", mu_err), ("pi_err", pi_err)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be a finite nonnegative number, got {v}")));
        }
    }
    Ok(mu_err * pi_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xi(a: i64, z: i64, d: u32) -> RateExponent {
        minimax_rate_exponent(&RateInputs::new(Real::int(a), Real::int(z), d).unwrap()).unwrap()
    }

    #[test]
    fn holder_examples() {
        for s in 1..6 {
            assert_eq!(holder_rate(Real::int(s), s as u32).unwrap().exponent, Real::ratio(1, 3));
        }
        assert_eq!(holder_rate(Real::int(1), 4).unwrap().exponent, Real::ratio(1, 6));
        let lim = holder_rate(Real::Approx(1e13), 3).unwrap();
        assert!(lim.at_limit);
        assert_eq!(lim.exponent, Real::ratio(1, 2));
        assert!(holder_rate(Real::int(0), 2).is_err());
        assert!(holder_rate(Real::int(1), 0).is_err());
    }

    #[test]
    fn minimax_examples() {
        let r = xi(3, 3, 3);
        assert_eq!(r.xi, Real::ratio(1, 2));
        assert!(r.in_root_n_regime);
        let r = xi(1, 1, 4);
        assert_eq!(r.xi, Real::ratio(1, 3));
        assert!(!r.in_root_n_regime);
        assert_eq!(xi(1, 1, 2).xi, Real::ratio(1, 2));
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(Real::parse("0.25").unwrap(), Real::ratio(1, 4));
        assert_eq!(Real::parse("3").unwrap(), Real::int(3));
        assert_eq!(Real::parse("2/6").unwrap(), Real::ratio(1, 3));
        assert_eq!(Real::parse("-1.5").unwrap(), Real::ratio(-3, 2));
        assert_eq!(Real::parse("1e13").unwrap(), Real::Approx(1e13));
        assert!(Real::parse("abc").is_err());
        assert!(Real::parse("1/0").is_err());
    }

    #[test]
    fn overflow_degrades_to_float() {
        let den = i64::MAX / 3;
        let tiny = Real::Exact(Ratio::new(7, den));
        let r = holder_rate(tiny, 5).unwrap();
        assert!(!r.exponent.is_exact());
        let expected = (7.0 / den as f64) / 5.0;
        assert!((r.exponent.to_f64() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remainder_examples() {
        assert_eq!(remainder_bound(0.0, 0.7).unwrap(), 0.0);
        let n: f64 = 10_000.0;
        assert!((remainder_bound(n.powf(-0.25), n.powf(-0.25)).unwrap() - 1e-2).abs() < 1e-15);
        assert!((remainder_bound(0.1, 0.2).unwrap() - 0.02).abs() < 1e-15);
        assert!(remainder_bound(-0.1, 0.2).is_err());
    }

    #[test]
    fn renders_exact_and_float() {
        let v = serde_json::to_value(xi(1, 1, 4)).unwrap();
        assert_eq!(v["xi"]["exact"], "1/3");
        assert!((v["xi"]["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn exponent_monotone_and_bounded(a in 1i64..50, z in 1i64..50, d in 1u32..20, bump in 1i64..10) {
            let base = xi(a, z, d).xi;
            prop_assert!(Real::int(0).le(base) && base.le(Real::ratio(1, 2)) && base.is_positive());
            prop_assert!(base.le(xi(a + bump, z, d).xi));
            prop_assert!(base.le(xi(a, z + bump, d).xi));
            prop_assert!(xi(a, z, d + bump as u32).xi.le(base));
        }

        #[test]
        fn remainder_symmetric_homogeneous(a in 0.0f64..10.0, b in 0.0f64..10.0, k in 0.0f64..5.0) {
            let r = remainder_bound(a, b).unwrap();
            prop_assert_eq!(r, remainder_bound(b, a).unwrap());
            prop_assert!((remainder_bound(k * a, b).unwrap() - k * r).abs() <= 1e-12 * (1.0 + k * r));
            prop_assert_eq!(r == 0.0, a == 0.0 || b == 0.0);
        }
    }
}
