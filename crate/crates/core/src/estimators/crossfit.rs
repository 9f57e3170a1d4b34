use crate::data::{split_folds, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::learners::{FitInput, Learner, Role};

use super::NuisanceEstimates;

/// Elementwise `max(ε, min(1 − ε, π))`, returning the clipped vector and the
/// number of entries that moved.
pub fn clip_propensities(pi: &[f64], epsilon: f64) -> Result<(Vec<f64>, usize)> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::invalid("clip", format!("epsilon must lie in [0, 0.5), got {epsilon}")));
    }
    let mut clipped = 0;
    let out = pi
        .iter()
        .map(|&p| {
            let c = p.clamp(epsilon, 1.0 - epsilon);
            if c != p {
                clipped += 1;
            }
            c
        })
        .collect();
    Ok((out, clipped))
}

/// K-fold cross-fitting with a fresh seeded fold assignment.
pub fn crossfit_nuisances(
    ds: &Dataset,
    outcome: &dyn Learner,
    propensity: &dyn Learner,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<NuisanceEstimates> {
    let folds = split_folds(ds.n(), k, seed)?;
    crossfit_with_folds(ds, outcome, propensity, &folds, epsilon)
}

/// For every fold, fits `μ_0` and `μ_1` on the control and treated units
/// outside the fold, `π` on all units outside the fold, and predicts on the
/// fold itself.
pub fn crossfit_with_folds(
    ds: &Dataset,
    outcome: &dyn Learner,
    propensity: &dyn Learner,
    folds: &FoldAssignment,
    epsilon: f64,
) -> Result<NuisanceEstimates> {
    let n = ds.n();
    if folds.n() != n {
        return Err(Error::invalid("folds", format!("assignment covers {} units, dataset has {n}", folds.n())));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::invalid("clip", format!("epsilon must lie in [0, 0.5), got {epsilon}")));
    }
    let mut mu0 = vec![f64::NAN; n];
    let mut mu1 = vec![f64::NAN; n];
    let mut pi_raw = vec![f64::NAN; n];
    let t = ds.treatment();
    let y = ds.outcome();
    let x = ds.covariates();
    let columns = ds.names();

    for fold in 0..folds.k {
        let test = folds.members(fold);
        if test.is_empty() {
            continue;
        }
        let train = folds.complement(fold);
        let by_arm = |arm: u8| -> Vec<usize> { train.iter().copied().filter(|&i| t[i] == arm).collect() };
        let (ctrl, trt) = (by_arm(0), by_arm(1));
        if ctrl.is_empty() || trt.is_empty() {
            return Err(Error::Estimation(format!(
                "training complement of fold {fold} lacks a treatment arm ({} treated, {} control)",
                trt.len(),
                ctrl.len()
            )));
        }
        let x_test = x.select_rows(&test);
        for (arm, rows, dest) in [(0u8, &ctrl, &mut mu0), (1u8, &trt, &mut mu1)] {
            let xa = x.select_rows(rows.as_slice());
            let ya: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let model = outcome
                .fit(FitInput { x: &xa, y: &ya, columns, role: Role::Outcome(arm) })
                .map_err(|e| e.context(format!("outcome model for arm {arm}, fold {fold}")))?;
            for (&i, p) in test.iter().zip(model.predict(&x_test)) {
                dest[i] = p;
            }
        }
        let xp = x.select_rows(&train);
        let tp: Vec<f64> = train.iter().map(|&i| t[i] as f64).collect();
        let model = propensity
            .fit(FitInput { x: &xp, y: &tp, columns, role: Role::Propensity })
            .map_err(|e| e.context(format!("propensity model, fold {fold}")))?;
        for (&i, p) in test.iter().zip(model.predict(&x_test)) {
            pi_raw[i] = p;
        }
    }

    for (name, v) in [("mu0_hat", &mu0), ("mu1_hat", &mu1), ("pi_hat", &pi_raw)] {
        if let Some(i) = v.iter().position(|p| !p.is_finite()) {
            return Err(Error::Estimation(format!("non-finite {name} prediction for unit {i}")));
        }
    }
    let (pi_hat, clipped_count) = clip_propensities(&pi_raw, epsilon)?;
    Ok(NuisanceEstimates {
        mu0_hat: mu0,
        mu1_hat: mu1,
        pi_hat,
        clip_epsilon: epsilon,
        clipped_count,
        folds: folds.clone(),
        outcome_learner: outcome.describe(),
        propensity_learner: propensity.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_examples() {
        let (v, c) = clip_propensities(&[0.001, 0.5, 0.999], 0.01).unwrap();
        assert_eq!(v, vec![0.01, 0.5, 0.99]);
        assert_eq!(c, 2);
        let pi = [0.0, 0.3, 1.0];
        assert_eq!(clip_propensities(&pi, 0.0).unwrap(), (pi.to_vec(), 0));
        assert!(clip_propensities(&pi, 0.5).is_err());
        assert!(clip_propensities(&pi, -0.1).is_err());
    }
}
