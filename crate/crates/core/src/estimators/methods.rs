use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

use super::bootstrap;
use super::{EffectEstimate, Method, NuisanceEstimates};

fn check_lengths(ds: &Dataset, nuis: &NuisanceEstimates) -> Result<()> {
    let n = ds.n();
    if nuis.mu0_hat.len() != n || nuis.mu1_hat.len() != n || nuis.pi_hat.len() != n {
        return Err(Error::invalid(
            "nuisances",
            format!(
                "lengths {}/{}/{} do not match n = {n}",
                nuis.mu0_hat.len(),
                nuis.mu1_hat.len(),
                nuis.pi_hat.len()
            ),
        ));
    }
    Ok(())
}

/// `(2T − 1)·π + (1 − T)`: `π` for treated units, `1 − π` for controls.
#[inline]
pub fn aipw_denominator(t: u8, pi: f64) -> f64 {
    let t = t as f64;
    (2.0 * t - 1.0) * pi + (1.0 - t)
}

/// Per-unit AIPW contributions
/// `(2T − 1)(Y − μ̂_T) / {(2T − 1)π̂ + (1 − T)} + μ̂_1 − μ̂_0`.
pub fn aipw_contributions(ds: &Dataset, nuis: &NuisanceEstimates) -> Result<Vec<f64>> {
    check_lengths(ds, nuis)?;
    let (t, y) = (ds.treatment(), ds.outcome());
    (0..ds.n())
        .map(|i| {
            let sign = 2.0 * t[i] as f64 - 1.0;
            let mu_t = if t[i] == 1 { nuis.mu1_hat[i] } else { nuis.mu0_hat[i] };
            let denom = aipw_denominator(t[i], nuis.pi_hat[i]);
            if denom == 0.0 {
                return Err(Error::Estimation(format!("zero propensity denominator for unit {i}")));
            }
            Ok(sign * (y[i] - mu_t) / denom + nuis.mu1_hat[i] - nuis.mu0_hat[i])
        })
        .collect()
}

fn from_influence(method: Method, phi: Vec<f64>, nuis: &NuisanceEstimates) -> EffectEstimate {
    let point = mean(&phi);
    let se = sample_sd(&phi) / (phi.len() as f64).sqrt();
    let mut est = EffectEstimate::new(method, point, se, nuis);
    est.influence = phi;
    est
}

/// Cross-fitted doubly robust (one-step AIPW) estimate with
/// influence-function standard error.
pub fn estimate_dr(ds: &Dataset, nuis: &NuisanceEstimates) -> Result<EffectEstimate> {
    let phi = aipw_contributions(ds, nuis)?;
    Ok(from_influence(Method::Dr, phi, nuis))
}

/// Horvitz–Thompson IPW with influence-function standard error.
pub fn estimate_ipw(ds: &Dataset, nuis: &NuisanceEstimates) -> Result<EffectEstimate> {
    check_lengths(ds, nuis)?;
    let (t, y) = (ds.treatment(), ds.outcome());
    let phi = (0..ds.n())
        .map(|i| {
            let p = nuis.pi_hat[i];
            if t[i] == 1 {
                if p == 0.0 {
                    return Err(Error::Estimation(format!("zero propensity for treated unit {i}")));
                }
                Ok(y[i] / p)
            } else {
                if p == 1.0 {
                    return Err(Error::Estimation(format!("unit propensity for control unit {i}")));
                }
                Ok(-y[i] / (1.0 - p))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(from_influence(Method::Ipw, phi, nuis))
}

pub(crate) fn plugin_point(nuis: &NuisanceEstimates) -> f64 {
    let diff: Vec<f64> = nuis.mu1_hat.iter().zip(&nuis.mu0_hat).map(|(a, b)| a - b).collect();
    mean(&diff)
}

/// Regression plugin `Pₙ(μ̂_1 − μ̂_0)` with a fold-preserving bootstrap
/// standard error over the stored nuisances.
pub fn estimate_plugin(
    ds: &Dataset,
    nuis: &NuisanceEstimates,
    replicates: usize,
    seed: u64,
) -> Result<EffectEstimate> {
    check_lengths(ds, nuis)?;
    let stat = |_: &Dataset, nu: &NuisanceEstimates| Ok(plugin_point(nu));
    let (se, summary) = bootstrap::no_refit(ds, nuis, replicates, seed, &stat)?;
    let mut est = EffectEstimate::new(Method::Plugin, plugin_point(nuis), se, nuis);
    est.bootstrap = Some(summary);
    Ok(est)
}

/// Sorted `(π, index)` pairs of one arm.
fn arm_index(t: &[u8], pi: &[f64], arm: u8) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..t.len()).filter(|&i| t[i] == arm).map(|i| (pi[i], i)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

/// Index of the entry nearest to `p`; ties go to the lowest unit index.
fn nearest(sorted: &[(f64, usize)], p: f64) -> usize {
    let pos = sorted.partition_point(|e| e.0 < p);
    let left = pos.checked_sub(1).map(|j| (p - sorted[j].0, j));
    let right = (pos < sorted.len()).then(|| (sorted[pos].0 - p, pos));
    let block_min = |j: usize| {
        // lowest unit index among entries sharing sorted[j].0
        let v = sorted[j].0;
        let mut k = j;
        while k > 0 && sorted[k - 1].0 == v {
            k -= 1;
        }
        sorted[k].1
    };
    match (left, right) {
        (Some((dl, jl)), Some((dr, jr))) => {
            if dl < dr {
                block_min(jl)
            } else if dr < dl {
                block_min(jr)
            } else {
                block_min(jl).min(block_min(jr))
            }
        }
        (Some((_, jl)), None) => block_min(jl),
        (None, Some((_, jr))) => block_min(jr),
        (None, None) => unreachable!("arm checked nonempty"),
    }
}

/// 1-nearest-neighbour propensity matching with replacement in both
/// directions: every unit is compared with the opposite-arm unit of closest
/// `π̂`, and the signed differences `(2T − 1)(Y − Y_match)` are averaged.
pub fn psm_point(t: &[u8], y: &[f64], pi: &[f64]) -> Result<f64> {
    let treated = arm_index(t, pi, 1);
    let control = arm_index(t, pi, 0);
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Estimation("propensity matching needs both arms".into()));
    }
    let total: f64 = (0..t.len())
        .map(|i| {
            let pool = if t[i] == 1 { &control } else { &treated };
            let j = nearest(pool, pi[i]);
            (2.0 * t[i] as f64 - 1.0) * (y[i] - y[j])
        })
        .sum();
    Ok(total / t.len() as f64)
}

/// Matching estimate with a fold-preserving bootstrap standard error that
/// re-matches each resample on the stored propensities.
pub fn estimate_psm_1nn(
    ds: &Dataset,
    nuis: &NuisanceEstimates,
    replicates: usize,
    seed: u64,
) -> Result<EffectEstimate> {
    check_lengths(ds, nuis)?;
    let point = psm_point(ds.treatment(), ds.outcome(), &nuis.pi_hat)?;
    let stat = |d: &Dataset, nu: &NuisanceEstimates| psm_point(d.treatment(), d.outcome(), &nu.pi_hat);
    let (se, summary) = bootstrap::no_refit(ds, nuis, replicates, seed, &stat)?;
    let mut est = EffectEstimate::new(Method::Psm, point, se, nuis);
    est.bootstrap = Some(summary);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split_folds;
    use nalgebra::DMatrix;

    fn dataset(t: Vec<u8>, y: Vec<f64>) -> Dataset {
        let n = t.len();
        Dataset::new(y, t, DMatrix::zeros(n, 0), vec![]).unwrap()
    }

    fn nuisances(mu0: Vec<f64>, mu1: Vec<f64>, pi: Vec<f64>) -> NuisanceEstimates {
        let n = pi.len();
        NuisanceEstimates {
            mu0_hat: mu0,
            mu1_hat: mu1,
            pi_hat: pi,
            clip_epsilon: 0.0,
            clipped_count: 0,
            folds: split_folds(n, 2, 0).unwrap(),
            outcome_learner: "test".into(),
            propensity_learner: "test".into(),
        }
    }

    #[test]
    fn two_row_hand_example() {
        // Hand evaluation: row 1 gives (2 − 1)/0.5 + 1 − 0 = 3, row 2 gives
        // −(1 − 1)/0.5 + 1 − 1 = 0.
        let ds = dataset(vec![1, 0], vec![2.0, 1.0]);
        let nu = nuisances(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]);
        let est = estimate_dr(&ds, &nu).unwrap();
        assert_eq!(est.influence, vec![3.0, 0.0]);
        assert_eq!(est.point, 1.5);
        assert_eq!(est.se, (4.5f64).sqrt() / 2f64.sqrt());
        assert_eq!(est.ci, [1.5 - 1.96 * est.se, 1.5 + 1.96 * est.se]);
    }

    #[test]
    fn exact_outcome_fit_reduces_to_plugin() {
        let ds = dataset(vec![1, 0, 1, 0], vec![2.0, 1.0, 5.0, -1.0]);
        let nu = nuisances(vec![0.0, 1.0, 3.0, -1.0], vec![2.0, 4.0, 5.0, 0.0], vec![0.3, 0.6, 0.2, 0.9]);
        let dr = estimate_dr(&ds, &nu).unwrap();
        assert!((dr.point - plugin_point(&nu)).abs() < 1e-15);
    }

    #[test]
    fn zero_regressions_give_horvitz_thompson() {
        let y = vec![2.0, 1.0, 5.0, -1.0, 0.5];
        let t = vec![1, 0, 1, 0, 0];
        let ds = dataset(t.clone(), y.clone());
        let nu = nuisances(vec![0.0; 5], vec![0.0; 5], vec![0.5; 5]);
        let expected = mean(&(0..5).map(|i| 2.0 * (2.0 * t[i] as f64 - 1.0) * y[i]).collect::<Vec<_>>());
        assert!((estimate_dr(&ds, &nu).unwrap().point - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_denominator_is_reported() {
        let ds = dataset(vec![1, 0], vec![1.0, 1.0]);
        let nu = nuisances(vec![0.0; 2], vec![0.0; 2], vec![0.0, 0.5]);
        assert!(estimate_dr(&ds, &nu).is_err());
        assert!(estimate_ipw(&ds, &nu).is_err());
    }

    #[test]
    fn ipw_examples() {
        let ds = dataset(vec![1, 0], vec![2.0, 1.0]);
        let nu = nuisances(vec![0.0; 2], vec![0.0; 2], vec![0.5; 2]);
        assert_eq!(estimate_ipw(&ds, &nu).unwrap().point, 1.0);

        let eps = 0.01;
        let y = vec![1.0, 2.0, 4.0];
        let all_treated = Dataset::new(y.clone(), vec![1, 1, 1], DMatrix::zeros(3, 0), vec![]);
        // a single-arm dataset is still a valid Dataset
        let ds = all_treated.unwrap();
        let nu = nuisances(vec![0.0; 3], vec![0.0; 3], vec![1.0 - eps; 3]);
        let got = estimate_ipw(&ds, &nu).unwrap().point;
        assert!((got - mean(&y) / (1.0 - eps)).abs() < 1e-12);

        let ds = dataset(vec![1, 0, 1], vec![0.0; 3]);
        let nu = nuisances(vec![0.0; 3], vec![0.0; 3], vec![0.4; 3]);
        assert_eq!(estimate_ipw(&ds, &nu).unwrap().point, 0.0);
    }

    #[test]
    fn plugin_examples() {
        let ds = dataset(vec![1, 0, 1, 0], vec![0.0; 4]);
        let nu = nuisances(vec![1.0, 2.0, 3.0, 4.0], vec![1.5, 2.5, 3.5, 4.5], vec![0.5; 4]);
        let est = estimate_plugin(&ds, &nu, 50, 1).unwrap();
        assert!((est.point - 0.5).abs() < 1e-15);
        assert!(est.se.abs() < 1e-15);
        assert!(est.influence.is_empty());
        let same = nuisances(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4]);
        assert_eq!(estimate_plugin(&ds, &same, 50, 1).unwrap().point, 0.0);
    }

    #[test]
    fn psm_examples() {
        assert_eq!(psm_point(&[1, 0], &[3.0, 1.0], &[0.4, 0.4]).unwrap(), 2.0);
        assert_eq!(psm_point(&[1, 0, 0, 1], &[2.0; 4], &[0.1, 0.5, 0.3, 0.9]).unwrap(), 0.0);
        // Pairs (π = 0.3): treated 7, control 5; (π = 0.7): treated 10, control 6.
        // Contrasts 2, 2, 4, 4 average to 3.
        let t = [1, 0, 1, 0];
        let y = [7.0, 5.0, 10.0, 6.0];
        let pi = [0.3, 0.3, 0.7, 0.7];
        assert_eq!(psm_point(&t, &y, &pi).unwrap(), 3.0);
        assert!(psm_point(&[1, 1], &[1.0, 2.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn psm_ties_go_to_lowest_index() {
        // Control units 1 and 3 are equidistant from the treated unit at 0.5;
        // unit 1 (lower index) must be chosen. Unit 2 ties within its own value.
        let t = [1, 0, 0, 0, 0];
        let y = [10.0, 1.0, 2.0, 3.0, 4.0];
        let pi = [0.5, 0.4, 0.4, 0.6, 0.9];
        let sorted = arm_index(&t, &pi, 0);
        assert_eq!(nearest(&sorted, 0.5), 1);
        assert_eq!(nearest(&sorted, 0.62), 3);
        assert_eq!(nearest(&sorted, 0.0), 1);
        let _ = y;
    }

    #[test]
    fn denominator_identity_holds_exactly() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(5);
        for _ in 0..1_000_000 {
            let p: f64 = rng.random();
            assert_eq!(aipw_denominator(1, p), p);
            assert_eq!(aipw_denominator(0, p), 1.0 - p);
        }
    }
}
