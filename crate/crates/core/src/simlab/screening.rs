use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{fit_kernel, fit_linear, Bandwidth, FittedModel};
use crate::seeds;
use crate::stats::{mean, norm_sf, sample_sd};

use super::dgp::DgpSpec;
use super::monte_carlo::{generate_dataset, replication_seed};
use super::truth::GroundTruth;

fn default_level() -> f64 {
    0.05
}
fn default_eval_points() -> usize {
    10_000
}

/// Screen-then-regress versus direct regression of `μ₁`.
///
/// The DGP's signal covariates play the role of `V` and its noise columns the
/// role of `W`, so every `W_j` is independent of `Y` given `(T, V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningConfig {
    pub dgp: DgpSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    #[serde(default)]
    pub bandwidth: Bandwidth,
}

/// Fisher-z test of `w ⟂ y | z` using residuals from linear fits on `z`.
/// Returns the two-sided p-value.
pub fn partial_correlation_test(y: &[f64], w: &[f64], z: &DMatrix<f64>) -> Result<f64> {
    let n = y.len();
    let df = n as f64 - z.ncols() as f64 - 3.0;
    if df <= 0.0 {
        return Err(Error::invalid("n", format!("{n} rows are too few to condition on {} variables", z.ncols())));
    }
    let ry = residuals(z, y)?;
    let rw = residuals(z, w)?;
    let syy: f64 = ry.iter().map(|v| v * v).sum();
    let sww: f64 = rw.iter().map(|v| v * v).sum();
    if syy == 0.0 || sww == 0.0 {
        return Ok(1.0);
    }
    let r = (ry.iter().zip(&rw).map(|(a, b)| a * b).sum::<f64>() / (syy * sww).sqrt()).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let stat = r.atanh() * df.sqrt();
    Ok(2.0 * norm_sf(stat.abs()))
}

fn residuals(z: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
    let fit = fit_linear(z, v)?;
    Ok(v.iter().zip(fit.predict(z)).map(|(a, b)| a - b).collect())
}

fn columns(x: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), keep.len(), |i, j| x[(i, keep[j])])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReplication {
    pub replication: usize,
    pub retained: Vec<String>,
    pub l2_screened: f64,
    pub l2_direct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningCell {
    pub n: usize,
    pub replications: usize,
    pub failed: usize,
    pub w_columns: Vec<String>,
    /// Share of replications in which each `W` column was retained.
    pub retention_rate: Vec<f64>,
    /// Binomial standard error of a rejection rate equal to the level.
    pub retention_se_at_level: f64,
    pub mean_retained: f64,
    pub mean_l2_screened: f64,
    pub mcse_l2_screened: f64,
    pub mean_l2_direct: f64,
    pub mcse_l2_direct: f64,
    /// Mean of `l2_screened − l2_direct` and its Monte Carlo error.
    pub mean_l2_difference: f64,
    pub mcse_l2_difference: f64,
    pub runs: Vec<ScreeningReplication>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub config: ScreeningConfig,
    pub cells: Vec<ScreeningCell>,
}

struct Split {
    v: Vec<usize>,
    w: Vec<usize>,
}

fn one_replication(cfg: &ScreeningConfig, truth: &GroundTruth, split: &Split, n: usize, r: usize) -> Result<ScreeningReplication> {
    let rep_seed = replication_seed(cfg.seed, r);
    let ds = generate_dataset(&cfg.dgp, n, rep_seed)?;
    let x = ds.covariates();
    let names = ds.names();

    let mut cond = DMatrix::zeros(n, 1 + split.v.len());
    for i in 0..n {
        cond[(i, 0)] = ds.treatment()[i] as f64;
        for (k, &j) in split.v.iter().enumerate() {
            cond[(i, 1 + k)] = x[(i, j)];
        }
    }
    let mut keep = split.v.clone();
    for &j in &split.w {
        let wj: Vec<f64> = x.column(j).iter().copied().collect();
        if partial_correlation_test(ds.outcome(), &wj, &cond)? < cfg.level {
            keep.push(j);
        }
    }
    keep.sort_unstable();
    let all: Vec<usize> = (0..ds.d()).collect();

    let treated: Vec<usize> = (0..n).filter(|&i| ds.treatment()[i] == 1).collect();
    let arm: Dataset = ds.select_rows(&treated);
    let eval = cfg.dgp.draw(cfg.eval_points, seeds::derive(rep_seed, 0xe7a1))?.covariates;
    let mu1 = truth.outcome(1, names)?;
    let target: Vec<f64> = (0..eval.nrows())
        .map(|i| mu1(&eval.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let l2 = |cols: &[usize]| -> Result<f64> {
        let model = fit_kernel(&columns(arm.covariates(), cols), arm.outcome(), cfg.bandwidth)?;
        let pred = model.predict(&columns(&eval, cols));
        Ok((pred.iter().zip(&target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / target.len() as f64).sqrt())
    };
    let l2_direct = l2(&all)?;
    let l2_screened = if keep == all { l2_direct } else { l2(&keep)? };
    Ok(ScreeningReplication {
        replication: r,
        retained: keep.iter().map(|&j| names[j].clone()).collect(),
        l2_screened,
        l2_direct,
    })
}

/// Runs both pipelines on shared datasets and reports L2 errors of `μ̂₁`
/// against the true `μ₁` on fresh evaluation draws, plus `W` retention.
pub fn screening_experiment(cfg: &ScreeningConfig) -> Result<ScreeningReport> {
    if cfg.replications < 2 {
        return Err(Error::invalid("replications", format!("need at least 2, got {}", cfg.replications)));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {}", cfg.level)));
    }
    if cfg.eval_points == 0 {
        return Err(Error::invalid("eval_points", "must be positive"));
    }
    if cfg.n_grid.is_empty() {
        return Err(Error::invalid("n_grid", "at least one sample size is required"));
    }
    let truth = GroundTruth::new(&cfg.dgp)?;
    let names = cfg.dgp.names();
    truth.outcome(1, &names)?;
    let signal = cfg.dgp.signal_names().len();
    let split = Split { v: (0..signal).collect(), w: (signal..names.len()).collect() };
    let w_names: Vec<String> = split.w.iter().map(|&j| names[j].clone()).collect();

    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        let results: Vec<Result<ScreeningReplication>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| one_replication(cfg, &truth, &split, n, r))
            .collect();
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok(run) => runs.push(run),
                Err(e) => failures.push(format!("replication {r}: {e}")),
            }
        }
        let m = runs.len();
        if m == 0 {
            return Err(Error::Estimation(format!("every screening replication failed at n = {n}: {}", failures[0])));
        }
        let rt = (m as f64).sqrt();
        let a: Vec<f64> = runs.iter().map(|r| r.l2_screened).collect();
        let b: Vec<f64> = runs.iter().map(|r| r.l2_direct).collect();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let retention_rate = split
            .w
            .iter()
            .map(|&j| runs.iter().filter(|r| r.retained.contains(&names[j])).count() as f64 / m as f64)
            .collect();
        cells.push(ScreeningCell {
            n,
            replications: cfg.replications,
            failed: failures.len(),
            w_columns: w_names.clone(),
            retention_rate,
            retention_se_at_level: (cfg.level * (1.0 - cfg.level) / m as f64).sqrt(),
            mean_retained: mean(&runs.iter().map(|r| r.retained.len() as f64).collect::<Vec<_>>()),
            mean_l2_screened: mean(&a),
            mcse_l2_screened: sample_sd(&a) / rt,
            mean_l2_direct: mean(&b),
            mcse_l2_direct: sample_sd(&b) / rt,
            mean_l2_difference: mean(&diff),
            mcse_l2_difference: sample_sd(&diff) / rt,
            runs,
            failures,
        });
    }
    Ok(ScreeningReport { config: cfg.clone(), cells })
}
