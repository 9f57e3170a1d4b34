//! Simulation laboratory: data-generating processes with known ground truth,
//! a Monte Carlo engine, convergence-rate diagnostics and the covariate
//! screening experiment.

mod dgp;
mod monte_carlo;
mod plot;
mod screening;
mod truth;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use dgp::{DgpSpec, Draw, LinearGaussian, MBias, SmoothNonparam, UnmeasuredConfounder, MAX_ARM_RETRIES};
pub use monte_carlo::{
    fit_rate_slope, replication_seed, run_monte_carlo, write_cells_csv, CellSummary, Failure, MethodSlope,
    MethodSpec, RateSlope, ReplicationRecord, SimReport,
};
pub use plot::plot_spec;
pub use screening::{
    partial_correlation_test, screening_experiment, ScreeningCell, ScreeningConfig, ScreeningReplication,
    ScreeningReport,
};
pub use truth::{
    mbias_adjusted_beta, mbias_closed_form, mbias_gauss_hermite, uc_gamma, uniform_cube_mean, GroundTruth,
    MBiasConditional, TruthSummary,
};

/// Samples a dataset and its ground truth. Deterministic in `seed`; if an arm
/// is empty the draw is repeated with derived seeds, up to
/// [`MAX_ARM_RETRIES`] times.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if n < 2 {
        return Err(Error::invalid("n", format!("need at least 2 units, got {n}")));
    }
    let truth = GroundTruth::new(dgp)?;
    Ok((monte_carlo::generate_dataset(dgp, n, seed)?, truth))
}

/// Input of the `simulate` command: a Monte Carlo study, optionally followed
/// by a screening study on the same DGP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dgp: DgpSpec,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningOptions {
    #[serde(default = "ScreeningOptions::default_level")]
    pub level: f64,
    #[serde(default = "ScreeningOptions::default_eval_points")]
    pub eval_points: usize,
    #[serde(default)]
    pub bandwidth: crate::learners::Bandwidth,
}

impl ScreeningOptions {
    fn default_level() -> f64 {
        0.05
    }
    fn default_eval_points() -> usize {
        10_000
    }
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        ScreeningOptions {
            level: Self::default_level(),
            eval_points: Self::default_eval_points(),
            bandwidth: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningReport>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.methods.is_empty() && self.screening.is_none() {
            return Err(Error::invalid("methods", "give at least one method or a screening block"));
        }
        if self.replications < 2 {
            return Err(Error::invalid("replications", format!("need at least 2, got {}", self.replications)));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::invalid("n_grid", "need one or more sample sizes, each at least 2"));
        }
        for m in &self.methods {
            m.estimator.validate().map_err(|e| e.context(format!("method {}", m.label())))?;
        }
        Ok(())
    }

    pub fn run(&self) -> Result<SimOutput> {
        self.validate()?;
        let monte_carlo = if self.methods.is_empty() {
            None
        } else {
            Some(run_monte_carlo(&self.dgp, &self.methods, &self.n_grid, self.replications, self.seed)?)
        };
        let screening = match self.screening {
            None => None,
            Some(o) => Some(screening_experiment(&ScreeningConfig {
                dgp: self.dgp.clone(),
                n_grid: self.n_grid.clone(),
                replications: self.replications,
                seed: self.seed,
                level: o.level,
                eval_points: o.eval_points,
                bandwidth: o.bandwidth,
            })?),
        };
        Ok(SimOutput { monte_carlo, screening })
    }
}
