//! The Monte Carlo operating-characteristics study.
//!
//! A study crosses scenarios with borrowing strategies and replicates each
//! cell `B` times. Replication `r` always consumes the stream `(seed, r)`,
//! so every strategy sees the same generated trial in the same replication
//! (common random numbers) and results are independent of the parallel
//! schedule. A replication that fails for a data-dependent reason (logistic
//! separation in a pathological draw, a rank-deficient design) is redrawn
//! from a derived substream, capped at three retries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure, invalid_arg, Error, Result};
use crate::mpi::{calibrate_power_params, MpiConfig, PowerParams};
use crate::posterior::{effect_summary, sample_control_posterior, sample_treatment_posterior};
use crate::propensity::{external_weights, fit_logistic, propensity_scores, WeightVector};
use crate::propensity::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::RngStream;
use crate::scenarios::{ScenarioId, ScenarioSpec};
use crate::summary::{arm_summary, weighted_summary};
use crate::trial::{generate_trial, GenConfig, TrialData};

/// How the external controls are borrowed in one study cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Propensity-weighted borrowing with calibrated strengths.
    PswBpp,
    /// Fixed strengths with unit external weights (the comparator).
    Fixed { a1: f64, a2: f64 },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::PswBpp => "psw-bpp".to_string(),
            Strategy::Fixed { a1, a2 } => format!("fixed:{a1},{a2}"),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("psw-bpp") {
            return Ok(Strategy::PswBpp);
        }
        if let Some(rest) = t.strip_prefix("fixed:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() == 2 {
                let a1: f64 = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| invalid_arg(format!("bad strength '{}'", parts[0])))?;
                let a2: f64 = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| invalid_arg(format!("bad strength '{}'", parts[1])))?;
                let p = PowerParams::new(a1, a2)?;
                return Ok(Strategy::Fixed { a1: p.a1, a2: p.a2 });
            }
        }
        Err(invalid_arg(format!(
            "unknown strategy '{s}' (expected 'psw-bpp' or 'fixed:a1,a2')"
        )))
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Full study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenarios: Vec<ScenarioId>,
    /// Current-study size per replication.
    pub n: usize,
    /// External cohort size per replication.
    pub n_external: usize,
    /// Replications per (scenario, strategy) cell.
    pub reps: usize,
    /// Posterior draws retained per arm.
    pub draws: usize,
    /// Posterior draws discarded up front.
    pub burn_in: usize,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    /// Apply propensity weights to fixed-strength strategies too.
    #[serde(default)]
    pub fb_weighted: bool,
    #[serde(default)]
    pub mpi: MpiConfig,
    /// Worker thread cap; falls back to `BORROWKIT_THREADS`, then to the
    /// machine's parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

/// One replication's effect summary plus calibration bookkeeping.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RepOutcome {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub prob_positive: f64,
    pub params: PowerParams,
    /// Effective sample size of the external weights in force.
    pub ess: f64,
    /// Redraws consumed before this replication succeeded.
    pub retries: u32,
}

/// Aggregated operating characteristics of one study cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bias: f64,
    pub abias: f64,
    pub rmse: f64,
    /// Sample standard deviation of the estimates (NaN when B = 1).
    pub se: f64,
    pub width: f64,
    pub cp: f64,
}

/// One output-table row.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub strategy: String,
    pub scenario: ScenarioId,
    pub n: usize,
    pub n_e: usize,
    pub bias: f64,
    pub abias: f64,
    pub rmse: f64,
    pub se: f64,
    pub width: f64,
    pub cp: f64,
    /// Total redraws across the cell's replications.
    pub retries: u64,
}

/// Calibrated strengths per replication (constant for fixed strategies).
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRecord {
    pub scenario: ScenarioId,
    pub strategy: String,
    pub rep: u64,
    pub a1: f64,
    pub a2: f64,
    pub ess: f64,
}

/// Study output: metric rows in (scenario, strategy) order plus the
/// per-replication calibration trace.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub rows: Vec<MetricsRow>,
    pub calibrations: Vec<CalibrationRecord>,
}

/// Operating characteristics from (estimate, lower, upper) records.
///
/// `bias` is the mean error, `abias` the mean absolute error, `rmse` the
/// square root of the mean squared error, `se` the sample standard deviation
/// of the estimates, `width` the mean interval width, and `cp` the fraction
/// of intervals containing the truth.
pub fn evaluate(records: &[(f64, f64, f64)], truth: f64) -> Result<Metrics> {
    ensure!(
        records.len() >= 2,
        "metrics need at least two replications, got {}",
        records.len()
    );
    let b = records.len() as f64;
    let bias = records.iter().map(|(e, _, _)| e - truth).sum::<f64>() / b;
    let abias = records
        .iter()
        .map(|(e, _, _)| (e - truth).abs())
        .sum::<f64>()
        / b;
    let rmse = (records
        .iter()
        .map(|(e, _, _)| (e - truth) * (e - truth))
        .sum::<f64>()
        / b)
        .sqrt();
    let mean_est = records.iter().map(|(e, _, _)| e).sum::<f64>() / b;
    let se = (records
        .iter()
        .map(|(e, _, _)| (e - mean_est) * (e - mean_est))
        .sum::<f64>()
        / (b - 1.0))
        .sqrt();
    let width = records.iter().map(|(_, lo, hi)| hi - lo).sum::<f64>() / b;
    let cp = records
        .iter()
        .filter(|(_, lo, hi)| *lo <= truth && truth <= *hi)
        .count() as f64
        / b;
    Ok(Metrics {
        bias,
        abias,
        rmse,
        se,
        width,
        cp,
    })
}

/// Degenerate single-replication row: error metrics collapse to the one
/// observed error and the spread is undefined.
fn evaluate_single(record: (f64, f64, f64), truth: f64) -> Metrics {
    let (e, lo, hi) = record;
    let err = e - truth;
    Metrics {
        bias: err,
        abias: err.abs(),
        rmse: err.abs(),
        se: f64::NAN,
        width: hi - lo,
        cp: if lo <= truth && truth <= hi { 1.0 } else { 0.0 },
    }
}

/// Errors worth redrawing the replication for: data-dependent degeneracies
/// of a particular draw rather than configuration mistakes.
fn retryable(err: &Error) -> bool {
    matches!(
        err,
        Error::Separation
            | Error::NonConvergence { .. }
            | Error::SingularDesign
            | Error::RankDeficient(_)
            | Error::EssTooSmall { .. }
    )
}

const MAX_RETRIES: u32 = 3;

/// Runs replication `rep` of one study cell on the stream `(seed, rep)`.
pub fn run_replication(
    gen: &GenConfig,
    strategy: Strategy,
    mpi: &MpiConfig,
    fb_weighted: bool,
    draws: usize,
    burn_in: usize,
    seed: u64,
    rep: u64,
) -> Result<RepOutcome> {
    let mut attempt: u32 = 0;
    loop {
        let mut rng = RngStream::with_substream(seed, rep, attempt as u64);
        match replicate_once(gen, strategy, mpi, fb_weighted, draws, burn_in, &mut rng) {
            Ok(mut outcome) => {
                outcome.retries = attempt;
                return Ok(outcome);
            }
            Err(e) if attempt < MAX_RETRIES && retryable(&e) => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

fn replicate_once(
    gen: &GenConfig,
    strategy: Strategy,
    mpi: &MpiConfig,
    fb_weighted: bool,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<RepOutcome> {
    let trial = generate_trial(gen, rng)?;
    let analysis = analyze_trial(&trial, strategy, mpi, fb_weighted, draws, burn_in, rng)?;
    Ok(RepOutcome {
        estimate: analysis.effect.mean,
        lower: analysis.effect.lower95,
        upper: analysis.effect.upper95,
        width: analysis.effect.width,
        prob_positive: analysis.effect.prob_positive,
        params: analysis.effect.power_params,
        ess: analysis.weight_ess,
        retries: 0,
    })
}

/// Shared single-trial analysis used by the study and exercised directly in
/// tests: weights, calibration, posteriors, effect summary.
pub(crate) struct TrialAnalysis {
    pub effect: crate::posterior::EffectSummary,
    /// `sum(w)` of the external weights in force (before the off-switch).
    pub weight_ess: f64,
}

pub(crate) fn analyze_trial(
    trial: &TrialData,
    strategy: Strategy,
    mpi: &MpiConfig,
    fb_weighted: bool,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<TrialAnalysis> {
    let cur = arm_summary(&trial.control)?;
    let treat = arm_summary(&trial.treatment)?;

    let needs_ps = matches!(strategy, Strategy::PswBpp) || fb_weighted;
    let weights = if needs_ps {
        let coef = fit_logistic(&trial.ps_data, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        let scores = propensity_scores(&coef, &trial.ps_data)?;
        let external_scores: Vec<f64> = scores
            .iter()
            .zip(trial.ps_data.labels())
            .filter(|(_, &is_current)| !is_current)
            .map(|(s, _)| *s)
            .collect();
        external_weights(&external_scores)?
    } else {
        WeightVector::unit(trial.external.n())
    };
    let weight_ess = weights.ess();

    // too little effective information to score or borrow: switch off.
    // A rank-deficient external fit (fewer subjects than design columns)
    // degrades the same way instead of failing the replication.
    let fitted = if trial.external.n() < 2 || weight_ess <= 1.0 {
        None
    } else {
        match weighted_summary(&trial.external, &weights) {
            Ok(ext) => Some(ext),
            Err(Error::RankDeficient(_)) | Err(Error::EssTooSmall { .. }) => None,
            Err(e) => return Err(e),
        }
    };

    let (params, ext_summary) = match fitted {
        None => (PowerParams::OFF, None),
        Some(ext) => {
            let params = match strategy {
                Strategy::PswBpp => calibrate_power_params(&cur, &ext, mpi)?.params,
                Strategy::Fixed { a1, a2 } => PowerParams::new(a1, a2)?,
            };
            (params, Some(ext))
        }
    };

    let draws_t = sample_treatment_posterior(&treat, draws, burn_in, rng)?;
    let borrow = ext_summary.as_ref().map(|ext| (ext, params));
    let draws_c = sample_control_posterior(&cur, borrow, draws, burn_in, rng)?;

    let profile = trial.pooled_profile();
    let ess_borrowed = if params.is_off() { 0.0 } else { weight_ess };
    let effect = effect_summary(&draws_t, &draws_c, &profile, ess_borrowed, params)?;
    Ok(TrialAnalysis { effect, weight_ess })
}

fn thread_count(cfg: &StudyConfig) -> Result<usize> {
    if let Some(t) = cfg.threads {
        ensure!(t >= 1, "thread count must be at least 1");
        return Ok(t);
    }
    match std::env::var("BORROWKIT_THREADS") {
        Ok(v) => {
            let t: usize = v
                .parse()
                .map_err(|_| Error::Config(format!("BORROWKIT_THREADS is not a count: '{v}'")))?;
            ensure!(t >= 1, "BORROWKIT_THREADS must be at least 1");
            Ok(t)
        }
        Err(_) => Ok(0), // rayon default: machine parallelism
    }
}

/// Runs the full study. Output rows appear in (scenario, strategy) input
/// order; every value is a deterministic function of the configuration.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    ensure!(
        !cfg.scenarios.is_empty(),
        "at least one scenario is required"
    );
    ensure!(
        !cfg.strategies.is_empty(),
        "at least one strategy is required"
    );
    ensure!(cfg.reps >= 1, "at least one replication is required");
    ensure!(cfg.draws >= 2, "at least two posterior draws are required");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg)?)
        .build()
        .map_err(|e| Error::Config(format!("could not build thread pool: {e}")))?;

    // flatten every (scenario, strategy, rep) task for scheduling; results
    // are re-grouped by task index so the schedule cannot affect the output
    let mut tasks = Vec::new();
    for &scenario in &cfg.scenarios {
        for &strategy in &cfg.strategies {
            for rep in 0..cfg.reps {
                tasks.push((scenario, strategy, rep as u64));
            }
        }
    }

    let outcomes: Vec<RepOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(scenario, strategy, rep)| {
                let gen = GenConfig::new(ScenarioSpec::get(scenario), cfg.n, cfg.n_external);
                run_replication(
                    &gen,
                    strategy,
                    &cfg.mpi,
                    cfg.fb_weighted,
                    cfg.draws,
                    cfg.burn_in,
                    cfg.seed,
                    rep,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let truth = GenConfig::new(ScenarioSpec::get(cfg.scenarios[0]), cfg.n, cfg.n_external).theta;
    let mut rows = Vec::new();
    let mut calibrations = Vec::new();
    let mut idx = 0;
    for &scenario in &cfg.scenarios {
        for &strategy in &cfg.strategies {
            let cell = &outcomes[idx..idx + cfg.reps];
            idx += cfg.reps;
            let records: Vec<(f64, f64, f64)> = cell
                .iter()
                .map(|o| (o.estimate, o.lower, o.upper))
                .collect();
            let metrics = if cfg.reps == 1 {
                evaluate_single(records[0], truth)
            } else {
                evaluate(&records, truth)?
            };
            let retries = cell.iter().map(|o| o.retries as u64).sum();
            rows.push(MetricsRow {
                strategy: strategy.label(),
                scenario,
                n: cfg.n,
                n_e: cfg.n_external,
                bias: metrics.bias,
                abias: metrics.abias,
                rmse: metrics.rmse,
                se: metrics.se,
                width: metrics.width,
                cp: metrics.cp,
                retries,
            });
            for (rep, o) in cell.iter().enumerate() {
                calibrations.push(CalibrationRecord {
                    scenario,
                    strategy: strategy.label(),
                    rep: rep as u64,
                    a1: o.params.a1,
                    a2: o.params.a2,
                    ess: o.ess,
                });
            }
        }
    }
    Ok(StudyResult { rows, calibrations })
}
