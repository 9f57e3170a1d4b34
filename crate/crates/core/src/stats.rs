use statrs::distribution::{Continuous, ContinuousCDF, Normal};


pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n−1 denominator; 0 for a single value.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub(crate) fn norm_sf(x: f64) -> f64 {
    std_normal().sf(x)
}

pub(crate) fn norm_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}


/// Logistic map kept strictly inside (0, 1).
pub(crate) fn expit(x: f64) -> f64 {
    const LO: f64 = 1e-15;
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(LO, 1.0 - LO)
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
