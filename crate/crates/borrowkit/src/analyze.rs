//! Dataset analysis: the full borrowing pipeline on a CSV-shaped dataset.
//!
//! The pipeline fits the propensity model (current vs. external), weights the
//! external controls, calibrates or fixes the borrowing strengths, samples
//! both arm posteriors, and summarizes the treatment effect — alongside a
//! no-borrowing baseline for comparison. Degenerate external data (absent,
//! fewer than two subjects, vanishing effective sample size, or a design too
//! thin to fit) switch borrowing off rather than failing, with a note in the
//! report.
//!
//! Reproducibility: the treatment posterior consumes stream 0 of the seed and
//! both control posteriors (borrowing and baseline) consume stream 1, so a
//! zero-strength configuration yields an effect summary identical to the
//! baseline, draw for draw.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{ensure, Error, Result};
use crate::mpi::{
    calibrate_power_params, MpiConfig, MpiDof, MpiFunctional, MpiReport, MpiWeighting, PowerParams,
};
use crate::posterior::{
    effect_summary, sample_control_posterior, sample_treatment_posterior, EffectSummary,
};
use crate::propensity::{
    external_weights, fit_logistic, propensity_scores, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::rng::RngStream;
use crate::study::Strategy;
use crate::summary::{arm_summary, weighted_summary, ArmSummary, WeightedSummary};

/// Which covariate profile the effect is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectProfile {
    /// `[1, pooled current-study covariate means]`.
    #[default]
    PooledMean,
    /// `[1, 0, ..., 0]`: the intercept difference.
    InterceptDifference,
}

fn default_draws() -> usize {
    5000
}

fn default_burn_in() -> usize {
    2000
}

fn default_strategy() -> Strategy {
    Strategy::PswBpp
}

fn default_threshold() -> f64 {
    0.975
}

/// Analysis settings, usually loaded from a JSON file. Unknown keys are
/// rejected so typos fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub outcome_column: String,
    pub treatment_column: String,
    pub source_column: String,
    pub covariate_columns: Vec<String>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub mpi_weighting: MpiWeighting,
    #[serde(default)]
    pub mpi_dof: MpiDof,
    #[serde(default)]
    pub mpi_functional: MpiFunctional,
    #[serde(default)]
    pub effect: EffectProfile,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.covariate_columns.is_empty(),
            "at least one covariate column is required"
        );
        let mut names = self.covariate_columns.clone();
        names.sort();
        names.dedup();
        ensure!(
            names.len() == self.covariate_columns.len(),
            "covariate columns contain duplicates"
        );
        ensure!(
            self.success_threshold > 0.5 && self.success_threshold < 1.0,
            "success threshold must lie in (0.5, 1), got {}",
            self.success_threshold
        );
        ensure!(self.draws >= 2, "at least two posterior draws are required");
        Ok(())
    }

    /// Parses and validates a JSON configuration.
    pub fn from_json(text: &str) -> Result<AnalysisConfig> {
        let cfg: AnalysisConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mpi_config(&self) -> MpiConfig {
        MpiConfig {
            weighting: self.mpi_weighting,
            dof: self.mpi_dof,
            functional: self.mpi_functional,
        }
    }
}

/// Full analysis output, serialized as the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    /// Effect summary under the configured borrowing strategy.
    pub effect: EffectSummary,
    /// Effect summary with borrowing switched off (same treatment draws).
    pub no_borrow_comparison: EffectSummary,
    /// Compatibility indices between the control arms.
    pub mpi: MpiReport,
    /// Effective external sample size actually borrowed.
    pub ess_borrowed: f64,
    /// Whether `P(effect > 0)` exceeds the success threshold.
    pub success: bool,
    pub n_treated: usize,
    pub n_control: usize,
    pub n_external: usize,
    /// Degenerate-data notes (empty when the full pipeline ran).
    pub notes: Vec<String>,
    /// Configuration echo for provenance.
    pub config: AnalysisConfig,
}

/// Outcome of the external-data pipeline: weights, weighted summary and
/// indices, or a degenerate marker with explanatory notes.
struct ExternalPipeline {
    ext: Option<WeightedSummary>,
    mpi: MpiReport,
    weight_ess: f64,
    notes: Vec<String>,
}

fn external_pipeline(
    dataset: &Dataset,
    cur: &ArmSummary,
    cfg: &AnalysisConfig,
) -> Result<ExternalPipeline> {
    let dof_mean = (cur.n - 1) as u32;
    let degenerate = |ess: f64, note: &str| ExternalPipeline {
        ext: None,
        mpi: MpiReport::degenerate(dof_mean),
        weight_ess: ess,
        notes: vec![note.to_string()],
    };

    let Some(external) = dataset.external.as_ref() else {
        return Ok(degenerate(0.0, "no external rows; borrowing disabled"));
    };
    if external.n() < 2 {
        return Ok(degenerate(
            0.0,
            "fewer than two external subjects; borrowing disabled",
        ));
    }

    let ps = dataset.ps_data()?;
    let coef = fit_logistic(&ps, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    let scores = propensity_scores(&coef, &ps)?;
    let external_scores: Vec<f64> = scores
        .iter()
        .zip(ps.labels())
        .filter(|(_, &is_current)| !is_current)
        .map(|(s, _)| *s)
        .collect();
    let weights = external_weights(&external_scores)?;
    let weight_ess = weights.ess();
    if weight_ess <= 1.0 {
        return Ok(degenerate(
            weight_ess,
            "external effective sample size is at most 1; borrowing disabled",
        ));
    }

    let ext = match weighted_summary(external, &weights) {
        Ok(ext) => ext,
        Err(Error::RankDeficient(_)) | Err(Error::EssTooSmall { .. }) => {
            return Ok(degenerate(
                weight_ess,
                "external design too thin for a weighted fit; borrowing disabled",
            ));
        }
        Err(e) => return Err(e),
    };
    let mpi = calibrate_power_params(cur, &ext, &cfg.mpi_config())?;
    Ok(ExternalPipeline {
        ext: Some(ext),
        mpi,
        weight_ess,
        notes: Vec::new(),
    })
}

/// Strengths the configured strategy puts in force, given the pipeline state.
fn strengths_in_force(
    strategy: Strategy,
    pipeline: &ExternalPipeline,
    notes: &mut Vec<String>,
) -> Result<PowerParams> {
    if pipeline.ext.is_none() {
        if !matches!(strategy, Strategy::PswBpp) {
            notes.push("fixed strengths overridden to zero: external data unusable".to_string());
        }
        return Ok(PowerParams::OFF);
    }
    match strategy {
        Strategy::PswBpp => Ok(pipeline.mpi.params),
        Strategy::Fixed { a1, a2 } => PowerParams::new(a1, a2),
    }
}

/// Runs the full analysis on a parsed dataset.
pub fn run_analysis(dataset: &Dataset, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    ensure!(
        dataset.covariate_names == cfg.covariate_columns,
        "dataset covariates {:?} do not match the configuration {:?}",
        dataset.covariate_names,
        cfg.covariate_columns
    );
    let treat = arm_summary(&dataset.treatment)?;
    let cur = arm_summary(&dataset.control)?;

    let pipeline = external_pipeline(dataset, &cur, cfg)?;
    let mut notes = pipeline.notes.clone();
    let params = strengths_in_force(cfg.strategy, &pipeline, &mut notes)?;

    let profile = match cfg.effect {
        EffectProfile::PooledMean => dataset.pooled_profile(),
        EffectProfile::InterceptDifference => dataset.intercept_profile(),
    };

    // stream 0: treatment; stream 1: both control posteriors, so that a
    // zero-strength analysis matches the baseline draw for draw
    let mut rng_t = RngStream::new(cfg.seed, 0);
    let draws_t = sample_treatment_posterior(&treat, cfg.draws, cfg.burn_in, &mut rng_t)?;

    let mut rng_c0 = RngStream::new(cfg.seed, 1);
    let draws_c0 = sample_control_posterior(&cur, None, cfg.draws, cfg.burn_in, &mut rng_c0)?;

    let borrow = pipeline.ext.as_ref().map(|ext| (ext, params));
    let mut rng_c = RngStream::new(cfg.seed, 1);
    let draws_c = sample_control_posterior(&cur, borrow, cfg.draws, cfg.burn_in, &mut rng_c)?;

    let ess_borrowed = if params.is_off() {
        0.0
    } else {
        pipeline.weight_ess
    };
    let effect = effect_summary(&draws_t, &draws_c, &profile, ess_borrowed, params)?;
    let no_borrow_comparison =
        effect_summary(&draws_t, &draws_c0, &profile, 0.0, PowerParams::OFF)?;
    let success = effect.prob_positive > cfg.success_threshold;

    Ok(AnalysisReport {
        effect,
        no_borrow_comparison,
        mpi: pipeline.mpi,
        ess_borrowed,
        success,
        n_treated: dataset.n_treated(),
        n_control: dataset.n_control(),
        n_external: dataset.n_external(),
        notes,
        config: cfg.clone(),
    })
}

/// Compatibility diagnostics without posterior sampling; field order is the
/// output key order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MpiSummary {
    pub t_stat: f64,
    pub mpi_mean: f64,
    pub f_stat: f64,
    pub mpi_var: f64,
    pub dof_mean: u32,
    pub dof_f: u32,
    pub a1: f64,
    pub a2: f64,
}

/// Runs only the compatibility pipeline: propensity weights, indices, and
/// the strengths the configured strategy would put in force.
pub fn run_mpi(dataset: &Dataset, cfg: &AnalysisConfig) -> Result<MpiSummary> {
    cfg.validate()?;
    ensure!(
        dataset.covariate_names == cfg.covariate_columns,
        "dataset covariates {:?} do not match the configuration {:?}",
        dataset.covariate_names,
        cfg.covariate_columns
    );
    let cur = arm_summary(&dataset.control)?;
    let pipeline = external_pipeline(dataset, &cur, cfg)?;
    let mut notes = Vec::new();
    let params = strengths_in_force(cfg.strategy, &pipeline, &mut notes)?;
    let m = &pipeline.mpi;
    Ok(MpiSummary {
        t_stat: m.t_stat,
        mpi_mean: m.mpi_mean,
        f_stat: m.f_stat,
        mpi_var: m.mpi_var,
        dof_mean: m.dof_mean,
        dof_f: m.dof_f,
        a1: params.a1,
        a2: params.a2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::rng::RngStream;
    use crate::scenarios::{ScenarioId, ScenarioSpec};
    use crate::trial::{generate_trial, GenConfig};

    fn config(seed: u64) -> AnalysisConfig {
        AnalysisConfig {
            outcome_column: "outcome".into(),
            treatment_column: "treatment".into(),
            source_column: "source".into(),
            covariate_columns: vec!["x2".into(), "x3".into(), "x4".into()],
            draws: 2000,
            burn_in: 100,
            seed,
            strategy: Strategy::PswBpp,
            mpi_weighting: MpiWeighting::default(),
            mpi_dof: MpiDof::default(),
            mpi_functional: MpiFunctional::default(),
            effect: EffectProfile::default(),
            success_threshold: 0.975,
        }
    }

    fn trial_dataset(seed: u64, scenario: ScenarioId, n: usize, n_e: usize) -> Dataset {
        let gen = GenConfig::new(ScenarioSpec::get(scenario), n, n_e);
        let trial = generate_trial(&gen, &mut RngStream::new(seed, 1000)).unwrap();
        Dataset::from_trial(&trial, &["x2", "x3", "x4"]).unwrap()
    }

    #[test]
    fn config_json_defaults_and_unknown_keys() {
        let cfg = AnalysisConfig::from_json(
            r#"{
                "outcome_column": "y",
                "treatment_column": "t",
                "source_column": "src",
                "covariate_columns": ["a", "b"],
                "seed": 7
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.draws, 5000);
        assert_eq!(cfg.burn_in, 2000);
        assert_eq!(cfg.strategy, Strategy::PswBpp);
        assert_eq!(cfg.success_threshold, 0.975);
        assert_eq!(cfg.mpi_weighting, MpiWeighting::Weighted);
        assert_eq!(cfg.effect, EffectProfile::PooledMean);

        let err = AnalysisConfig::from_json(r#"{"outcome_column": "y", "mystery": 1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("mystery"), "{err}");

        let err = AnalysisConfig::from_json(
            r#"{
                "outcome_column": "y",
                "treatment_column": "t",
                "source_column": "src",
                "covariate_columns": ["a"],
                "seed": 7,
                "success_threshold": 0.4
            }"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("0.5"), "{err}");
    }

    #[test]
    fn borrowing_analysis_runs_and_reports() {
        let dataset = trial_dataset(21, ScenarioId::II, 100, 500);
        let cfg = config(5);
        let report = run_analysis(&dataset, &cfg).unwrap();
        assert!(report.notes.is_empty());
        assert!(
            report.ess_borrowed > 100.0,
            "matched populations keep most weight"
        );
        assert!(!report.mpi.params.is_off());
        assert!((0.0..=1.0).contains(&report.effect.prob_positive));
        assert_eq!(report.n_treated, 50);
        assert_eq!(report.n_external, 500);
        // truth is 2, so a positive effect should be essentially certain
        assert!(report.effect.prob_positive > 0.99);
        assert!(report.success);
        // borrowing tightens the control posterior in this matched scenario
        assert!(report.effect.width < report.no_borrow_comparison.width);
    }

    #[test]
    fn fixed_zero_matches_the_baseline_bitwise() {
        let dataset = trial_dataset(22, ScenarioId::IV, 60, 200);
        let mut cfg = config(9);
        cfg.strategy = Strategy::Fixed { a1: 0.0, a2: 0.0 };
        let report = run_analysis(&dataset, &cfg).unwrap();
        assert_eq!(
            report.effect.mean.to_bits(),
            report.no_borrow_comparison.mean.to_bits()
        );
        assert_eq!(
            report.effect.lower95.to_bits(),
            report.no_borrow_comparison.lower95.to_bits()
        );
        assert_eq!(
            report.effect.upper95.to_bits(),
            report.no_borrow_comparison.upper95.to_bits()
        );
        assert_eq!(
            report.effect.sd.to_bits(),
            report.no_borrow_comparison.sd.to_bits()
        );
        assert_eq!(report.ess_borrowed, 0.0);
        // the compatibility indices are still reported
        assert!(report.mpi.mpi_mean > 0.0);
    }

    #[test]
    fn zero_external_rows_degrade_to_baseline() {
        let dataset = trial_dataset(23, ScenarioId::II, 40, 50);
        let no_ext = Dataset {
            external: None,
            covs_external: nalgebra::DMatrix::zeros(0, 3),
            ..dataset
        };
        let cfg = config(3);
        let report = run_analysis(&no_ext, &cfg).unwrap();
        assert!(report.mpi.params.is_off());
        assert_eq!(report.ess_borrowed, 0.0);
        assert_eq!(
            report.effect.mean.to_bits(),
            report.no_borrow_comparison.mean.to_bits()
        );
        assert!(
            report.notes.iter().any(|n| n.contains("no external rows")),
            "{:?}",
            report.notes
        );
        assert_eq!(report.n_external, 0);
    }

    #[test]
    fn analysis_is_deterministic_in_the_seed() {
        let dataset = trial_dataset(24, ScenarioId::IX, 60, 300);
        let cfg = config(11);
        let a = run_analysis(&dataset, &cfg).unwrap();
        let b = run_analysis(&dataset, &cfg).unwrap();
        assert_eq!(a.effect.mean.to_bits(), b.effect.mean.to_bits());
        assert_eq!(a.effect.lower95.to_bits(), b.effect.lower95.to_bits());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 12;
        let c = run_analysis(&dataset, &cfg2).unwrap();
        assert_ne!(a.effect.mean.to_bits(), c.effect.mean.to_bits());
    }

    #[test]
    fn mpi_summary_reports_strategy_strengths() {
        let dataset = trial_dataset(25, ScenarioId::II, 80, 400);
        let cfg = config(4);
        let m = run_mpi(&dataset, &cfg).unwrap();
        assert!((0.0..=1.0).contains(&m.mpi_mean));
        assert!((0.0..=1.0).contains(&m.mpi_var));
        assert_eq!(m.dof_mean, 39, "n_c - 1");
        assert_eq!(m.dof_f, 399, "raw external dof");
        assert!(
            (m.a1 - 0.5 * m.mpi_mean).abs() < 1e-15,
            "default tail calibration"
        );

        let mut fixed = cfg.clone();
        fixed.strategy = Strategy::Fixed { a1: 0.3, a2: 0.7 };
        let mf = run_mpi(&dataset, &fixed).unwrap();
        assert_eq!(mf.a1, 0.3);
        assert_eq!(mf.a2, 0.7);
        assert_eq!(
            mf.mpi_mean.to_bits(),
            m.mpi_mean.to_bits(),
            "indices are strategy-free"
        );

        // key order of the JSON serialization is pinned
        let json = serde_json::to_string(&m).unwrap();
        let order = [
            "\"t_stat\"",
            "\"mpi_mean\"",
            "\"f_stat\"",
            "\"mpi_var\"",
            "\"dof_mean\"",
            "\"dof_f\"",
            "\"a1\"",
            "\"a2\"",
        ];
        let mut pos = 0;
        for key in order {
            let at = json[pos..].find(key).map(|o| pos + o);
            assert!(at.is_some(), "key {key} missing or out of order in {json}");
            pos = at.unwrap();
        }
    }

    #[test]
    fn intercept_difference_profile_is_available() {
        let dataset = trial_dataset(26, ScenarioId::II, 60, 100);
        let mut cfg = config(8);
        cfg.effect = EffectProfile::InterceptDifference;
        let report = run_analysis(&dataset, &cfg).unwrap();
        // both profiles estimate the same treatment effect in this design,
        // just with more extrapolation noise at the intercept
        assert!((report.effect.mean - 2.0).abs() < 1.5);
    }
}
