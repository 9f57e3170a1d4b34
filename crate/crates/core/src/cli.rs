//! Command-line front end.
//!
//! Every invocation writes one JSON report holding the fully resolved
//! configuration, the result and a separate `runtime` block (job count,
//! timestamp). Re-running the echoed configuration reproduces `config` and
//! `result` exactly; `replay` does this and checks it.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::collider_bounds::{estimate_bounds, PartialIdentificationResult, DEFAULT_MAX_SUBSETS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, BootstrapMode, EffectEstimate, EstimatorConfig, Method};
use crate::learners::LearnerSpec;
use crate::rates::{minimax_rate_exponent, RateInputs, Real};
use crate::sensitivity::{bound_effect, tipping_point, BiasBound, BiasSign, SensitivityInterval, TippingPoint};
use crate::simlab::{plot_spec, write_cells_csv, SimConfig, SimOutput};

pub const SCHEMA_VERSION: &str = "1";
pub const JOBS_ENV: &str = "DRBOUNDS_JOBS";

#[derive(Parser, Debug)]
#[command(name = "drbounds", version, about = "Doubly robust effect estimation, sensitivity bounds and collider-robust partial identification")]
struct Cli {
    /// Worker threads; results do not depend on this
    #[arg(long, global = true, env = JOBS_ENV)]
    jobs: Option<usize>,

    /// Report file (default: drbounds-<command>.json)
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the adjusted treatment contrast from a CSV file
    Estimate {
        data: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Interval for the causal effect under bounded unmeasured confounding
    #[command(group(ArgGroup::new("bound").required(true).args(["delta", "gamma0", "sign"])))]
    #[command(group(ArgGroup::new("input").required(true).args(["data", "estimate"])))]
    Sensitivity {
        data: Option<PathBuf>,
        /// Reuse the estimate stored in an `estimate` report
        #[arg(long)]
        estimate: Option<PathBuf>,
        /// Treated fraction used to mix the per-arm bounds
        #[arg(long)]
        p1: Option<f64>,
        /// |γ| ≤ δ in both arms
        #[arg(long)]
        delta: Option<f64>,
        /// Range `l,u` of γ(·,0)
        #[arg(long, requires = "gamma1", value_parser = parse_pair, allow_hyphen_values = true)]
        gamma0: Option<(f64, f64)>,
        /// Range `l,u` of γ(·,1)
        #[arg(long, requires = "gamma0", value_parser = parse_pair, allow_hyphen_values = true)]
        gamma1: Option<(f64, f64)>,
        /// Known sign of γ: nonneg or nonpos
        #[arg(long, requires = "cap", value_parser = parse_sign)]
        sign: Option<BiasSign>,
        /// Magnitude cap for --sign
        #[arg(long, requires = "sign")]
        cap: Option<f64>,
        /// δ values to scan, as `a,b,c` or `start:stop:step`
        #[arg(long, value_parser = parse_grid)]
        tipping_grid: Option<Grid>,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Range of leave-j-out estimates over at most k dropped covariates
    Bounds {
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_colliders: usize,
        /// Covariate names that are never dropped
        #[arg(long, value_delimiter = ',')]
        known_non_colliders: Vec<String>,
        /// Refuse to run more adjustment subsets than this
        #[arg(long, default_value_t = DEFAULT_MAX_SUBSETS)]
        max_subsets: usize,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Monte Carlo study described by a JSON configuration
    Simulate {
        config: PathBuf,
        /// Also write a chart description to <output stem>.plot.json
        #[arg(long)]
        emit_plot_spec: bool,
    },
    /// Attainable convergence-rate exponent of the doubly robust estimator
    Rates {
        /// Smoothness of the outcome regressions (integer, decimal or a/b)
        #[arg(long)]
        alpha: String,
        /// Smoothness of the propensity score
        #[arg(long)]
        zeta: String,
        #[arg(long)]
        d: u32,
    },
    /// Re-run the configuration echoed in a report and compare results
    Replay { report: PathBuf },
}

#[derive(Args, Debug)]
struct ColumnArgs {
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long, default_value = "t")]
    treatment: String,
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    #[arg(long, default_value = "dr")]
    method: Method,
    #[arg(long, default_value = "kernel(bw=AUTO)")]
    outcome_learner: LearnerSpec,
    #[arg(long, default_value = "logistic")]
    propensity_learner: LearnerSpec,
    /// Cross-fitting folds K
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Propensity clipping ε
    #[arg(long, default_value_t = 0.01)]
    clip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap replicates B for plugin and matching standard errors
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// refit or no-refit
    #[arg(long, default_value = "refit", value_parser = parse_bootstrap_mode)]
    bootstrap_mode: BootstrapMode,
}

impl EstimatorArgs {
    fn resolve(&self) -> EstimatorConfig {
        EstimatorConfig {
            method: self.method,
            outcome_learner: self.outcome_learner.clone(),
            propensity_learner: self.propensity_learner.clone(),
            folds: self.folds,
            clip_epsilon: self.clip,
            seed: self.seed,
            bootstrap_replicates: self.bootstrap,
            bootstrap_mode: self.bootstrap_mode,
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [l, u] => Ok((
            l.parse().map_err(|_| format!("`{l}` is not a number"))?,
            u.parse().map_err(|_| format!("`{u}` is not a number"))?,
        )),
        _ => Err(format!("expected `lower,upper`, got `{s}`")),
    }
}

fn parse_sign(s: &str) -> std::result::Result<BiasSign, String> {
    match s.to_ascii_lowercase().as_str() {
        "nonneg" | "nonnegative" | "+" => Ok(BiasSign::Nonnegative),
        "nonpos" | "nonpositive" | "-" => Ok(BiasSign::Nonpositive),
        _ => Err(format!("expected nonneg or nonpos, got `{s}`")),
    }
}

fn parse_bootstrap_mode(s: &str) -> std::result::Result<BootstrapMode, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("expected refit or no-refit, got `{s}`"))
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
    if let [a, b, c] = s.split(':').collect::<Vec<_>>().as_slice() {
        let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
        if !(step > 0.0) || stop < start {
            return Err("range grids need start ≤ stop and a positive step".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        if count > 1_000_000 {
            return Err("grid has more than a million points".into());
        }
        return Ok(Grid((0..=count).map(|i| start + i as f64 * step).collect()));
    }
    s.split(',').map(num).collect::<std::result::Result<_, _>>().map(Grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataInput {
    pub path: PathBuf,
    pub outcome: String,
    pub treatment: String,
}

impl DataInput {
    fn load(&self) -> Result<Dataset> {
        Dataset::load_csv(&self.path, &self.outcome, &self.treatment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensitivitySource {
    Data { data: DataInput, estimator: EstimatorConfig },
    EstimateReport { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub input: SensitivitySource,
    /// Overrides the treated fraction of the data or report.
    pub p1: Option<f64>,
    pub bound: BiasBound,
    pub tipping_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub data: DataInput,
    pub estimator: EstimatorConfig,
    pub max_colliders: usize,
    pub known_non_colliders: Vec<String>,
    pub max_subsets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub alpha: String,
    pub zeta: String,
    pub d: u32,
}

/// Fully resolved configuration of one run, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Estimate { data: DataInput, estimator: EstimatorConfig },
    Sensitivity(SensitivityConfig),
    Bounds(BoundsConfig),
    Simulate(SimConfig),
    Rates(RatesConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Estimate { .. } => "estimate",
            RunConfig::Sensitivity(_) => "sensitivity",
            RunConfig::Bounds(_) => "bounds",
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Rates(_) => "rates",
        }
    }

    fn module(&self) -> &'static str {
        match self {
            RunConfig::Estimate { .. } => "estimators",
            RunConfig::Sensitivity(_) => "sensitivity",
            RunConfig::Bounds(_) => "collider_bounds",
            RunConfig::Simulate(_) => "simlab",
            RunConfig::Rates(_) => "rates",
        }
    }

    /// Checks every numeric setting before any data is read.
    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Estimate { estimator, .. } => estimator.validate(),
            RunConfig::Sensitivity(c) => {
                if let SensitivitySource::Data { estimator, .. } = &c.input {
                    estimator.validate()?;
                }
                if let Some(p) = c.p1 {
                    check_p1(p)?;
                }
                c.bound.validate()?;
                if let Some(g) = &c.tipping_grid {
                    if g.is_empty() || g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(Error::invalid("tipping-grid", "needs one or more finite values ≥ 0"));
                    }
                }
                Ok(())
            }
            RunConfig::Bounds(c) => {
                c.estimator.validate()?;
                if c.max_subsets == 0 {
                    return Err(Error::invalid("max-subsets", "must be positive"));
                }
                Ok(())
            }
            RunConfig::Simulate(c) => c.validate(),
            RunConfig::Rates(c) => {
                RateInputs::new(Real::parse(&c.alpha)?, Real::parse(&c.zeta)?, c.d)?;
                Ok(())
            }
        }
    }
}

fn check_p1(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p1", format!("must lie in [0, 1], got {p}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: EffectEstimate,
    /// Treated fraction of the sample.
    pub p1_hat: f64,
    pub adjustment_set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub estimate: EffectEstimate,
    pub adjustment_set: Vec<String>,
    pub interval: SensitivityInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tipping_point: Option<TippingPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesResult {
    pub xi: f64,
    pub xi_exact: Option<String>,
    pub terms: [Real; 2],
    pub in_root_n_regime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub jobs: usize,
    pub timestamp_unix: u64,
    pub version: String,
}

/// On-disk report. `config` and `result` are reproducible; `runtime` is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub config: RunConfig,
    pub result: Value,
    pub runtime: Runtime,
}

impl Report {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let report: Report = serde_json::from_reader(BufReader::new(file))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "report schema version {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// `config` and `result` serialized, the part that must replay exactly.
    pub fn reproducible_part(&self) -> Result<String> {
        Ok(serde_json::to_string(&(&self.config, &self.result))?)
    }
}

/// Output of a run before it is written: the result and a short summary.
pub struct Outcome {
    pub result: Value,
    pub summary: String,
    pub sim_output: Option<SimOutput>,
}

fn run_estimate(data: &DataInput, cfg: &EstimatorConfig) -> Result<Outcome> {
    let ds = data.load()?;
    let est = estimate(&ds, cfg, None)?;
    let summary = format!(
        "{} estimate {:.6} (se {:.6}), 95% CI [{:.6}, {:.6}], n = {}",
        est.method, est.point, est.se, est.ci[0], est.ci[1], est.n
    );
    let result = EstimateResult { estimate: est, p1_hat: ds.treated_fraction(), adjustment_set: ds.names().to_vec() };
    Ok(Outcome { result: serde_json::to_value(result)?, summary, sim_output: None })
}

fn run_sensitivity(c: &SensitivityConfig) -> Result<Outcome> {
    let (est, p1_data, adjustment_set) = match &c.input {
        SensitivitySource::Data { data, estimator } => {
            let ds = data.load()?;
            let est = estimate(&ds, estimator, None)?;
            (est, ds.treated_fraction(), ds.names().to_vec())
        }
        SensitivitySource::EstimateReport { path } => {
            let report = Report::load(path)?;
            let prior: EstimateResult = serde_json::from_value(report.result).map_err(|e| {
                Error::Data(format!("{} does not hold an estimate result: {e}", path.display()))
            })?;
            (prior.estimate, prior.p1_hat, prior.adjustment_set)
        }
    };
    let p1 = c.p1.unwrap_or(p1_data);
    check_p1(p1)?;
    let interval = bound_effect(&est, &c.bound, p1)?;
    let tipping = c.tipping_grid.as_deref().map(|g| tipping_point(&est, g)).transpose()?;
    let mut summary = format!(
        "effect interval [{:.6}, {:.6}] around {} estimate {:.6}",
        interval.lower, interval.upper, est.method, est.point
    );
    if let Some(t) = &tipping {
        let show = |v: Option<f64>| v.map_or_else(|| "beyond grid".to_string(), |d| format!("{d:.6}"));
        summary.push_str(&format!(
            "; tipping δ: point {}, CI {}",
            show(t.point),
            show(t.ci_adjusted)
        ));
    }
    let result = SensitivityResult { estimate: est, adjustment_set, interval, tipping_point: tipping };
    Ok(Outcome { result: serde_json::to_value(result)?, summary, sim_output: None })
}

fn run_bounds(c: &BoundsConfig) -> Result<Outcome> {
    let ds = c.data.load()?;
    let mut known = BTreeSet::new();
    for name in &c.known_non_colliders {
        let j = ds.names().iter().position(|n| n == name).ok_or_else(|| {
            Error::invalid("known-non-colliders", format!("`{name}` is not a covariate column"))
        })?;
        known.insert(j);
    }
    let res: PartialIdentificationResult = estimate_bounds(&ds, c.max_colliders, &c.estimator, &known, c.max_subsets, None)?;
    let name_of = |s: &[usize]| -> String {
        if s.is_empty() {
            "none".to_string()
        } else {
            s.iter().map(|&j| ds.names()[j].as_str()).collect::<Vec<_>>().join(",")
        }
    };
    let summary = format!(
        "{} adjustment sets; estimates range over [{:.6}, {:.6}] (dropping {} / {}), outer 95% CI [{:.6}, {:.6}]",
        res.entries.len(),
        res.point_bounds[0],
        res.point_bounds[1],
        name_of(res.argmin.excluded()),
        name_of(res.argmax.excluded()),
        res.outer_ci[0],
        res.outer_ci[1]
    );
    Ok(Outcome { result: serde_json::to_value(res)?, summary, sim_output: None })
}

fn run_simulate(c: &SimConfig) -> Result<Outcome> {
    let out = c.run()?;
    let mut lines = Vec::new();
    if let Some(mc) = &out.monte_carlo {
        for cell in &mc.cells {
            lines.push(format!(
                "{:<24} n={:<7} bias {:+.5} (mcse {:.5})  rmse {:.5}  coverage {:.3}  failed {}",
                cell.method, cell.n, cell.bias, cell.bias_mcse, cell.rmse, cell.coverage, cell.failed
            ));
        }
        for s in &mc.rmse_slopes {
            lines.push(format!("{:<24} rmse slope {:+.4} (se {:.4})", s.method, s.fit.slope, s.fit.slope_se));
        }
    }
    if let Some(sc) = &out.screening {
        for cell in &sc.cells {
            lines.push(format!(
                "screening n={:<7} L2 screened {:.5}  direct {:.5}  mean retained {:.2}",
                cell.n, cell.mean_l2_screened, cell.mean_l2_direct, cell.mean_retained
            ));
        }
    }
    Ok(Outcome { result: serde_json::to_value(&out)?, summary: lines.join("\n"), sim_output: Some(out) })
}

fn run_rates(c: &RatesConfig) -> Result<Outcome> {
    let inputs = RateInputs::new(Real::parse(&c.alpha)?, Real::parse(&c.zeta)?, c.d)?;
    let r = minimax_rate_exponent(&inputs)?;
    let result = RatesResult {
        xi: r.xi.to_f64(),
        xi_exact: r.xi.is_exact().then(|| r.xi.to_string()),
        terms: r.terms,
        in_root_n_regime: r.in_root_n_regime,
    };
    let summary = format!(
        "xi = {}{}",
        r.xi,
        if r.in_root_n_regime { " (root-n regime)" } else { "" }
    );
    Ok(Outcome { result: serde_json::to_value(result)?, summary, sim_output: None })
}

/// Runs a configuration on the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let run = || -> Result<Outcome> {
        cfg.validate()?;
        match cfg {
            RunConfig::Estimate { data, estimator } => run_estimate(data, estimator),
            RunConfig::Sensitivity(c) => run_sensitivity(c),
            RunConfig::Bounds(c) => run_bounds(c),
            RunConfig::Simulate(c) => run_simulate(c),
            RunConfig::Rates(c) => run_rates(c),
        }
    };
    run().map_err(|e| e.context(cfg.module()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |e| Error::Io { path: path.to_path_buf(), source: e };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_sim_tables(out: &SimOutput, report_path: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let create = |p: &Path| File::create(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e });
    if let Some(mc) = &out.monte_carlo {
        let p = sibling(report_path, ".cells.csv");
        write_cells_csv(mc, create(&p)?)?;
        written.push(p);
    }
    if let Some(sc) = &out.screening {
        let p = sibling(report_path, ".screening.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["n", "replications", "failed", "mean_l2_screened", "mcse_l2_screened", "mean_l2_direct", "mcse_l2_direct", "mean_retained"])?;
        for c in &sc.cells {
            w.write_record([
                c.n.to_string(),
                c.replications.to_string(),
                c.failed.to_string(),
                c.mean_l2_screened.to_string(),
                c.mcse_l2_screened.to_string(),
                c.mean_l2_direct.to_string(),
                c.mcse_l2_direct.to_string(),
                c.mean_retained.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: p.clone(), source: e })?;
        written.push(p);
    }
    Ok(written)
}

fn resolve(cli_command: Command) -> Result<Option<RunConfig>> {
    Ok(Some(match cli_command {
        Command::Estimate { data, columns, estimator } => RunConfig::Estimate {
            data: DataInput { path: data, outcome: columns.outcome, treatment: columns.treatment },
            estimator: estimator.resolve(),
        },
        Command::Sensitivity { data, estimate, p1, delta, gamma0, gamma1, sign, cap, tipping_grid, columns, estimator } => {
            let bound = match (delta, gamma0.zip(gamma1), sign.zip(cap)) {
                (Some(delta), None, None) => BiasBound::Symmetric { delta },
                (None, Some((gamma0, gamma1)), None) => BiasBound::PerArm { gamma0, gamma1 },
                (None, None, Some((sign, cap))) => BiasBound::Sign { sign, cap },
                _ => return Err(Error::invalid("bound", "give exactly one of --delta, --gamma0/--gamma1, --sign/--cap")),
            };
            let input = match (data, estimate) {
                (Some(path), None) => SensitivitySource::Data {
                    data: DataInput { path, outcome: columns.outcome, treatment: columns.treatment },
                    estimator: estimator.resolve(),
                },
                (None, Some(path)) => SensitivitySource::EstimateReport { path },
                _ => return Err(Error::invalid("estimate", "give either a data file or --estimate, not both")),
            };
            RunConfig::Sensitivity(SensitivityConfig { input, p1, bound, tipping_grid: tipping_grid.map(|g| g.0) })
        }
        Command::Bounds { data, max_colliders, known_non_colliders, max_subsets, columns, estimator } => {
            RunConfig::Bounds(BoundsConfig {
                data: DataInput { path: data, outcome: columns.outcome, treatment: columns.treatment },
                estimator: estimator.resolve(),
                max_colliders,
                known_non_colliders,
                max_subsets,
            })
        }
        Command::Simulate { config, .. } => {
            let file = File::open(&config).map_err(|e| Error::Io { path: config.clone(), source: e })?;
            let sim: SimConfig = serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Error::from(e).context(format!("simulation config {}", config.display())))?;
            RunConfig::Simulate(sim)
        }
        Command::Rates { alpha, zeta, d } => RunConfig::Rates(RatesConfig { alpha, zeta, d }),
        Command::Replay { .. } => return Ok(None),
    }))
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn run_parsed(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(Error::invalid("jobs", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Estimation(format!("cannot start {jobs} worker threads: {e}")))?;
    let emit_plot = matches!(cli.command, Command::Simulate { emit_plot_spec: true, .. });
    let replay_of = match &cli.command {
        Command::Replay { report } => Some(Report::load(report)?),
        _ => None,
    };
    let config = match (&replay_of, resolve(cli.command)?) {
        (Some(original), _) => original.config.clone(),
        (None, Some(cfg)) => cfg,
        (None, None) => unreachable!("replay always carries a report"),
    };
    let output = cli.output.unwrap_or_else(|| PathBuf::from(format!("drbounds-{}.json", config.name())));

    let outcome = pool.install(|| execute(&config))?;
    let report = Report {
        schema_version: SCHEMA_VERSION.to_string(),
        config,
        result: outcome.result,
        runtime: Runtime { jobs, timestamp_unix: timestamp(), version: env!("CARGO_PKG_VERSION").to_string() },
    };
    write_json(&output, &report)?;
    println!("{}", outcome.summary);
    if let Some(out) = &outcome.sim_output {
        for p in write_sim_tables(out, &output)? {
            println!("table: {}", p.display());
        }
        if let (true, Some(mc)) = (emit_plot, &out.monte_carlo) {
            let p = sibling(&output, ".plot.json");
            write_json(&p, &plot_spec(mc))?;
            println!("plot spec: {}", p.display());
        }
    }
    println!("report: {}", output.display());
    if let Some(original) = replay_of {
        if original.reproducible_part()? != report.reproducible_part()? {
            return Err(Error::Estimation("replayed report differs from the original".into()));
        }
        println!("replay: identical to the original report");
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 for invalid input or configuration, 2 for failures
/// during computation.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run_parsed(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
