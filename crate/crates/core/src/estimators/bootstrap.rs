use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::seeds;
use crate::stats::sample_sd;

use super::{crossfit_with_folds, NuisanceEstimates};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMode {
    /// Refit every nuisance on each resample.
    #[default]
    Refit,
    /// Resample the stored out-of-fold predictions only.
    NoRefit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mode: BootstrapMode,
    pub replicates: usize,
    /// Resamples whose statistic could not be computed; excluded from the SE.
    pub failed: usize,
}

pub(crate) type Statistic<'a> = dyn Fn(&Dataset, &NuisanceEstimates) -> Result<f64> + Sync + 'a;

/// Draws, within each fold, as many units as the fold holds, with
/// replacement. Resampled units keep their fold.
pub fn fold_preserving_resample(folds: &FoldAssignment, rng: &mut seeds::Rng) -> Vec<usize> {
    let mut idx = Vec::with_capacity(folds.n());
    for fold in 0..folds.k {
        let members = folds.members(fold);
        for _ in 0..members.len() {
            idx.push(members[rng.random_range(0..members.len())]);
        }
    }
    idx
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn summarize(draws: Vec<Result<f64>>, mode: BootstrapMode) -> Result<(f64, BootstrapSummary)> {
    let replicates = draws.len();
    let ok: Vec<f64> = draws.into_iter().filter_map(|d| d.ok()).collect();
    let failed = replicates - ok.len();
    if ok.len() < 2 {
        return Err(Error::Estimation(format!(
            "bootstrap: only {} of {replicates} resamples succeeded",
            ok.len()
        )));
    }
    if failed > 0 {
        log::warn!("bootstrap: {failed} of {replicates} resamples failed and were excluded");
    }
    Ok((sample_sd(&ok), BootstrapSummary { mode, replicates, failed }))
}

pub(crate) fn no_refit(
    ds: &Dataset,
    nuis: &NuisanceEstimates,
    replicates: usize,
    seed: u64,
    stat: &Statistic<'_>,
) -> Result<(f64, BootstrapSummary)> {
    let draws: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds::rng(seeds::derive(seed, b as u64));
            let idx = fold_preserving_resample(&nuis.folds, &mut rng);
            let resampled = NuisanceEstimates {
                mu0_hat: pick(&nuis.mu0_hat, &idx),
                mu1_hat: pick(&nuis.mu1_hat, &idx),
                pi_hat: pick(&nuis.pi_hat, &idx),
                folds: FoldAssignment { fold_of: pick(&nuis.folds.fold_of, &idx), ..nuis.folds.clone() },
                ..nuis.clone()
            };
            stat(&ds.select_rows(&idx), &resampled)
        })
        .collect();
    summarize(draws, BootstrapMode::NoRefit)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn refit(
    ds: &Dataset,
    folds: &FoldAssignment,
    outcome: &dyn Learner,
    propensity: &dyn Learner,
    epsilon: f64,
    replicates: usize,
    seed: u64,
    stat: &Statistic<'_>,
) -> Result<(f64, BootstrapSummary)> {
    let draws: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds::rng(seeds::derive(seed, b as u64));
            let idx = fold_preserving_resample(folds, &mut rng);
            let rds = ds.select_rows(&idx);
            let rfolds = FoldAssignment { fold_of: pick(&folds.fold_of, &idx), ..folds.clone() };
            let nu = crossfit_with_folds(&rds, outcome, propensity, &rfolds, epsilon)?;
            stat(&rds, &nu)
        })
        .collect();
    summarize(draws, BootstrapMode::Refit)
}
