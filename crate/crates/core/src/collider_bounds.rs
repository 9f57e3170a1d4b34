//! Partial identification under at most `k` unknown colliders.
//!
//! If some adjustment set `X \ X_j`, with `j` ranging over subsets of at most
//! `k` covariates, blocks every backdoor path, then one of the leave-`j`-out
//! contrasts `β_j` equals the causal effect, and the effect lies in
//! `[min_j β_j, max_j β_j]`. Covariates known not to be colliders are never
//! dropped.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EffectEstimate, EstimatorConfig, Z_CRIT};
use crate::learners::NuisanceTruth;
use crate::seeds;

pub const DEFAULT_MAX_SUBSETS: usize = 10_000;

/// Sorted set of excluded covariate indices; empty means "adjust for all".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetIndex(pub Vec<usize>);

impl SubsetIndex {
    pub fn excluded(&self) -> &[usize] {
        &self.0
    }

    pub fn as_set(&self) -> BTreeSet<usize> {
        self.0.iter().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn binomial(n: usize, r: usize) -> usize {
    let r = r.min(n - r);
    let mut acc: usize = 1;
    for i in 0..r {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return usize::MAX,
        };
    }
    acc
}

/// Number of subsets of `m` candidates with at most `k` elements, saturating.
pub fn subset_count(m: usize, k: usize) -> usize {
    (0..=k.min(m)).fold(0usize, |acc, s| acc.saturating_add(binomial(m, s)))
}

/// All subsets of `{0..d−1} \ known_non_colliders` of size at most `k`,
/// ordered by size and then lexicographically, starting with `∅`.
pub fn enumerate_subsets(
    d: usize,
    k: usize,
    known_non_colliders: &BTreeSet<usize>,
    max_subsets: usize,
) -> Result<Vec<SubsetIndex>> {
    if let Some(&bad) = known_non_colliders.iter().find(|&&j| j >= d) {
        return Err(Error::invalid("known-non-colliders", format!("index {bad} out of range for d = {d}")));
    }
    let candidates: Vec<usize> = (0..d).filter(|j| !known_non_colliders.contains(j)).collect();
    let m = candidates.len();
    let count = subset_count(m, k);
    if count > max_subsets {
        return Err(Error::invalid(
            "max-colliders",
            format!(
                "{count} adjustment subsets exceed the limit of {max_subsets}; \
                 lower k or declare more known non-colliders"
            ),
        ));
    }
    let mut out = Vec::with_capacity(count);
    for size in 0..=k.min(m) {
        let mut pos: Vec<usize> = (0..size).collect();
        loop {
            out.push(SubsetIndex(pos.iter().map(|&p| candidates[p]).collect()));
            // advance to the next combination in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| pos[i] < m - size + i) else { break };
            pos[i] += 1;
            for j in i + 1..size {
                pos[j] = pos[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsEntry {
    pub excluded: SubsetIndex,
    pub excluded_names: Vec<String>,
    pub estimate: EffectEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialIdentificationResult {
    pub entries: Vec<BoundsEntry>,
    /// `[min_j β̂_j, max_j β̂_j]`.
    pub point_bounds: [f64; 2],
    /// Union of the per-subset Wald intervals; conservative.
    pub outer_ci: [f64; 2],
    pub argmin: SubsetIndex,
    pub argmax: SubsetIndex,
    pub k: usize,
    pub known_non_colliders: Vec<usize>,
    pub estimator: EstimatorConfig,
}

impl PartialIdentificationResult {
    pub fn entry(&self, excluded: &[usize]) -> Option<&BoundsEntry> {
        self.entries.iter().find(|e| e.excluded.0 == excluded)
    }

    pub fn width(&self) -> f64 {
        self.point_bounds[1] - self.point_bounds[0]
    }
}

/// Seed used for one subset: the base seed xor a stable hash of the subset.
pub fn subset_seed(base: u64, subset: &SubsetIndex) -> u64 {
    base ^ seeds::hash_indices(&subset.0)
}

/// Estimates `β_j` for every enumerated subset with freshly cross-fitted
/// nuisances and assembles the identified range.
pub fn estimate_bounds(
    ds: &Dataset,
    k: usize,
    cfg: &EstimatorConfig,
    known_non_colliders: &BTreeSet<usize>,
    max_subsets: usize,
    truth: Option<Arc<dyn NuisanceTruth>>,
) -> Result<PartialIdentificationResult> {
    cfg.validate()?;
    let subsets = enumerate_subsets(ds.d(), k, known_non_colliders, max_subsets)?;
    let entries: Vec<BoundsEntry> = subsets
        .par_iter()
        .map(|subset| {
            let label = || format!("subset excluding {:?}", subset.0);
            let sub = ds.subset_covariates(&subset.as_set()).map_err(|e| e.context(label()))?;
            let local = EstimatorConfig { seed: subset_seed(cfg.seed, subset), ..cfg.clone() };
            let est = estimate(&sub, &local, truth.clone()).map_err(|e| e.context(label()))?;
            Ok(BoundsEntry {
                excluded_names: subset.0.iter().map(|&j| ds.names()[j].clone()).collect(),
                excluded: subset.clone(),
                estimate: est,
            })
        })
        .collect::<Result<_>>()?;

    let mut lo = 0;
    let mut hi = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.estimate.point < entries[lo].estimate.point {
            lo = i;
        }
        if e.estimate.point > entries[hi].estimate.point {
            hi = i;
        }
    }
    let outer_lo = entries.iter().map(|e| e.estimate.point - Z_CRIT * e.estimate.se).fold(f64::INFINITY, f64::min);
    let outer_hi = entries.iter().map(|e| e.estimate.point + Z_CRIT * e.estimate.se).fold(f64::NEG_INFINITY, f64::max);
    Ok(PartialIdentificationResult {
        point_bounds: [entries[lo].estimate.point, entries[hi].estimate.point],
        outer_ci: [outer_lo, outer_hi],
        argmin: entries[lo].excluded.clone(),
        argmax: entries[hi].excluded.clone(),
        entries,
        k,
        known_non_colliders: known_non_colliders.iter().copied().collect(),
        estimator: cfg.clone(),
    })
}
