use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EffectEstimate, EstimatorConfig};
use crate::learners::NuisanceTruth;
use crate::seeds;
use crate::stats::{mean, sample_sd};

use super::dgp::{DgpSpec, MAX_ARM_RETRIES};
use super::truth::{GroundTruth, TruthSummary};

/// An estimator configuration with an optional display label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

impl MethodSpec {
    pub fn new(name: &str, estimator: EstimatorConfig) -> Self {
        MethodSpec { name: Some(name.to_string()), estimator }
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!(
                "{}[{}|{}]",
                self.estimator.method, self.estimator.outcome_learner, self.estimator.propensity_learner
            ),
        }
    }
}

/// Seed of replication `r`.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    seed ^ r as u64
}

/// Like [`super::generate`] but reusing an existing truth.
pub(crate) fn generate_dataset(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    for attempt in 0..MAX_ARM_RETRIES {
        let s = if attempt == 0 { seed } else { seeds::derive(seed, attempt) };
        let draw = dgp.draw(n, s)?;
        let treated = draw.treatment.iter().filter(|&&t| t == 1).count();
        if treated == 0 || treated == n {
            continue;
        }
        let y = draw.observed_outcome();
        return Dataset::new(y, draw.treatment, draw.covariates, dgp.names());
    }
    Err(Error::Data(format!(
        "{} DGP produced a single treatment arm in {MAX_ARM_RETRIES} attempts at n = {n}",
        dgp.variant_name()
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub method: String,
    pub n: usize,
    pub replication: usize,
    pub point: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub n: usize,
    pub replication: usize,
    pub message: String,
}

/// Aggregates for one (method, n) cell. Bias, RMSE and coverage refer to
/// `β*`; the `_observed` fields refer to the observed-data contrast `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub n: usize,
    pub replications: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub bias: f64,
    pub bias_mcse: f64,
    pub bias_observed: f64,
    pub rmse: f64,
    pub rmse_mcse: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub coverage_mcse: f64,
    pub coverage_observed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub slope: f64,
    pub slope_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSlope {
    pub method: String,
    #[serde(flatten)]
    pub fit: RateSlope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub dgp: DgpSpec,
    pub truth: TruthSummary,
    pub methods: Vec<MethodSpec>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
    /// RMSE-vs-n log-log slopes, for methods with at least three sample sizes.
    pub rmse_slopes: Vec<MethodSlope>,
    pub failures: Vec<Failure>,
    pub records: Vec<ReplicationRecord>,
}

impl SimReport {
    pub fn cell(&self, method: &str, n: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    pub fn slope(&self, method: &str) -> Option<RateSlope> {
        self.rmse_slopes.iter().find(|s| s.method == method).map(|s| s.fit)
    }

    pub fn points(&self, method: &str, n: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.method == method && r.n == n).map(|r| r.point).collect()
    }
}

/// Least-squares slope of `log(rmse)` on `log(n)` with its standard error.
pub fn fit_rate_slope(points: &[(f64, f64)]) -> Result<RateSlope> {
    if points.len() < 3 {
        return Err(Error::invalid("points", format!("need at least 3 (n, rmse) pairs, got {}", points.len())));
    }
    if let Some(&(n, e)) = points.iter().find(|(n, e)| !(*n > 0.0 && *e > 0.0 && n.is_finite() && e.is_finite())) {
        return Err(Error::invalid("points", format!("n and rmse must be positive and finite, got ({n}, {e})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all sample sizes are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let slope_se = (rss / (points.len() - 2) as f64 / sxx).sqrt();
    Ok(RateSlope { slope, slope_se })
}

type JobOutput = Vec<std::result::Result<EffectEstimate, String>>;

fn summarize(method: &str, n: usize, replications: usize, ests: &[&EffectEstimate], beta_star: f64, beta_obs: f64) -> CellSummary {
    let points: Vec<f64> = ests.iter().map(|e| e.point).collect();
    let m = points.len();
    let rt = (m as f64).sqrt();
    let sq: Vec<f64> = points.iter().map(|p| (p - beta_star).powi(2)).collect();
    let rmse = mean(&sq).sqrt();
    let covered = |target: f64| -> Vec<f64> {
        ests.iter().map(|e| (e.ci[0] <= target && target <= e.ci[1]) as u8 as f64).collect()
    };
    let cov = covered(beta_star);
    let coverage = mean(&cov);
    CellSummary {
        method: method.to_string(),
        n,
        replications,
        succeeded: m,
        failed: replications - m,
        mean_estimate: mean(&points),
        sd_estimate: sample_sd(&points),
        bias: mean(&points) - beta_star,
        bias_mcse: sample_sd(&points) / rt,
        bias_observed: mean(&points) - beta_obs,
        rmse,
        // delta method on the mean squared error
        rmse_mcse: if rmse > 0.0 { sample_sd(&sq) / rt / (2.0 * rmse) } else { 0.0 },
        mean_se: mean(&ests.iter().map(|e| e.se).collect::<Vec<_>>()),
        coverage,
        coverage_mcse: (coverage * (1.0 - coverage) / m as f64).sqrt(),
        coverage_observed: mean(&covered(beta_obs)),
    }
}

/// Runs every method on shared datasets for each `(n, replication)` pair.
///
/// Replication `r` draws its data with seed `seed ⊕ r`; each method cross-fits
/// with a seed derived from that and its own configured seed. Failures are
/// recorded per (replication, method) and excluded from the aggregates.
pub fn run_monte_carlo(
    dgp: &DgpSpec,
    methods: &[MethodSpec],
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<SimReport> {
    if replications < 2 {
        return Err(Error::invalid("replications", format!("need at least 2, got {replications}")));
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods", "at least one method is required"));
    }
    if n_grid.is_empty() {
        return Err(Error::invalid("n_grid", "at least one sample size is required"));
    }
    if let Some(n) = n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::invalid("n_grid", format!("sample sizes must be at least 2, got {n}")));
    }
    for m in methods {
        m.estimator.validate().map_err(|e| e.context(format!("method {}", m.label())))?;
    }
    let labels: Vec<String> = methods.iter().map(MethodSpec::label).collect();
    if let Some(dup) = labels.iter().enumerate().find(|(i, l)| labels[..*i].contains(l)) {
        return Err(Error::invalid("methods", format!("duplicate method label `{}`", dup.1)));
    }
    let truth = GroundTruth::new(dgp)?;
    let summary = truth.summary();
    let shared: Arc<dyn NuisanceTruth> = Arc::new(truth);

    let jobs: Vec<(usize, usize)> = n_grid.iter().flat_map(|&n| (0..replications).map(move |r| (n, r))).collect();
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let rep_seed = replication_seed(seed, r);
            match generate_dataset(dgp, n, rep_seed) {
                Err(e) => vec![Err(format!("data generation: {e}")); methods.len()],
                Ok(ds) => methods
                    .iter()
                    .map(|m| {
                        let cfg = EstimatorConfig { seed: seeds::derive(rep_seed, m.estimator.seed), ..m.estimator.clone() };
                        estimate(&ds, &cfg, Some(shared.clone())).map_err(|e| e.to_string())
                    })
                    .collect(),
            }
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (mi, label) in labels.iter().enumerate() {
        for &n in n_grid {
            let mut ok = Vec::new();
            for (&(jn, r), out) in jobs.iter().zip(&outputs) {
                if jn != n {
                    continue;
                }
                match &out[mi] {
                    Ok(e) => {
                        records.push(ReplicationRecord { method: label.clone(), n, replication: r, point: e.point, se: e.se });
                        ok.push(e);
                    }
                    Err(msg) => failures.push(Failure { method: label.clone(), n, replication: r, message: msg.clone() }),
                }
            }
            if ok.len() < replications {
                log::warn!("{label} at n = {n}: {} of {replications} replications failed", replications - ok.len());
            }
            cells.push(summarize(label, n, replications, &ok, summary.beta_star, summary.beta_observed));
        }
    }

    let mut rmse_slopes = Vec::new();
    let mut distinct = n_grid.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() >= 3 {
        for label in &labels {
            let pts: Vec<(f64, f64)> = distinct
                .iter()
                .filter_map(|&n| cells.iter().find(|c| &c.method == label && c.n == n))
                .map(|c| (c.n as f64, c.rmse))
                .collect();
            if let Ok(fit) = fit_rate_slope(&pts) {
                rmse_slopes.push(MethodSlope { method: label.clone(), fit });
            }
        }
    }

    Ok(SimReport {
        dgp: dgp.clone(),
        truth: summary,
        methods: methods.to_vec(),
        n_grid: n_grid.to_vec(),
        replications,
        seed,
        cells,
        rmse_slopes,
        failures,
        records,
    })
}

/// Writes one CSV row per (method, n) cell.
pub fn write_cells_csv<W: std::io::Write>(report: &SimReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for c in &report.cells {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}
