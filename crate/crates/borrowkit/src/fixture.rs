//! Synthetic demonstration dataset generator.
//!
//! Emits a clearly-synthetic cohort shaped like a typical neurology
//! observational-plus-trial setting: a current study with a binary exposure
//! and an external all-control cohort, with age, gender, a verbal-memory
//! score, an allele count, and a cognitive screen as covariates. Marginal
//! summary statistics follow published baseline tables for such cohorts; the
//! joint distribution and outcomes are generated, not real data.
//!
//! By default the two cohorts are drawn from the *same* covariate population
//! (`matched`), which makes the fixture a well-posed demonstration of
//! borrowing: external controls genuinely resemble current ones. The
//! `shifted` variant draws each cohort from its own published marginals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analyze::AnalysisConfig;
use crate::dataset::Dataset;
use crate::error::{ensure, invalid_arg, Error, Result};
use crate::rng::RngStream;
use crate::samplers::sample_standard_normal;
use crate::summary::ArmData;

use nalgebra::{DMatrix, DVector};

/// Covariate population used for the external cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Populations {
    /// External covariates drawn from the current-study population.
    #[default]
    Matched,
    /// Each cohort uses its own published marginals.
    Shifted,
}

impl std::str::FromStr for Populations {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matched" => Ok(Populations::Matched),
            "shifted" => Ok(Populations::Shifted),
            other => Err(invalid_arg(format!(
                "unknown population mode '{other}' (expected matched or shifted)"
            ))),
        }
    }
}

/// Marginal covariate summaries of one cohort.
#[derive(Debug, Clone, Copy)]
struct CohortStats {
    male_rate: f64,
    age_mean: f64,
    age_sd: f64,
    ravlt_mean: f64,
    ravlt_sd: f64,
    /// Probabilities of allele counts 0, 1, 2.
    apoe4: [f64; 3],
    mmse_mean: f64,
    mmse_sd: f64,
}

const CURRENT_STATS: CohortStats = CohortStats {
    male_rate: 0.5518,
    age_mean: 73.19,
    age_sd: 7.36,
    ravlt_mean: 14.42,
    ravlt_sd: 5.03,
    apoe4: [0.5065, 0.3634, 0.1301],
    mmse_mean: 26.95,
    mmse_sd: 2.93,
};

const EXTERNAL_STATS: CohortStats = CohortStats {
    male_rate: 0.5775,
    age_mean: 75.27,
    age_sd: 6.73,
    ravlt_mean: 13.73,
    ravlt_sd: 4.44,
    apoe4: [0.5141, 0.3775, 0.1084],
    mmse_mean: 26.88,
    mmse_sd: 2.58,
};

/// Fixture generation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub n_current: usize,
    pub n_external: usize,
    /// True exposure effect injected into the outcomes.
    pub theta: f64,
    pub seed: u64,
    pub populations: Populations,
    /// Fraction of current-study subjects exposed.
    pub exposure_rate: f64,
    /// Outcome noise standard deviation.
    pub noise_sd: f64,
}

impl FixtureConfig {
    pub fn new(seed: u64) -> Self {
        FixtureConfig {
            n_current: 531,
            n_external: 710,
            theta: 0.4,
            seed,
            populations: Populations::Matched,
            exposure_rate: 0.6365,
            noise_sd: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.n_current >= 10,
            "current cohort needs at least 10 subjects"
        );
        ensure!(
            self.n_external >= 2,
            "external cohort needs at least 2 subjects"
        );
        ensure!(
            self.exposure_rate > 0.0 && self.exposure_rate < 1.0,
            "exposure rate must lie in (0, 1)"
        );
        ensure!(
            self.noise_sd >= 0.0,
            "noise standard deviation must be nonnegative"
        );
        let k = self.n_treated();
        ensure!(
            k >= 1 && k < self.n_current,
            "exposure rate {} leaves an empty arm at n = {}",
            self.exposure_rate,
            self.n_current
        );
        Ok(())
    }

    /// Exposed-subject count: the exposure rate rounded to a whole subject.
    pub fn n_treated(&self) -> usize {
        (self.n_current as f64 * self.exposure_rate).round() as usize
    }

    /// Column names of the emitted CSV, covariates in order.
    pub const COVARIATES: [&'static str; 5] = ["age", "gender", "ravlt", "apoe4", "mmse"];

    /// A ready-to-use analysis configuration bound to this fixture's columns.
    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            outcome_column: "outcome".to_string(),
            treatment_column: "treatment".to_string(),
            source_column: "source".to_string(),
            covariate_columns: Self::COVARIATES.iter().map(|s| s.to_string()).collect(),
            draws: 5000,
            burn_in: 2000,
            seed: self.seed,
            strategy: crate::study::Strategy::PswBpp,
            mpi_weighting: Default::default(),
            mpi_dof: Default::default(),
            mpi_functional: Default::default(),
            effect: Default::default(),
            success_threshold: 0.975,
        }
    }
}

fn draw_covariates(stats: &CohortStats, rng: &mut RngStream) -> [f64; 5] {
    let age = stats.age_mean + stats.age_sd * sample_standard_normal(rng);
    let gender = if rng.gen::<f64>() < stats.male_rate {
        1.0
    } else {
        0.0
    };
    let ravlt = stats.ravlt_mean + stats.ravlt_sd * sample_standard_normal(rng);
    let u: f64 = rng.gen();
    let apoe4 = if u < stats.apoe4[0] {
        0.0
    } else if u < stats.apoe4[0] + stats.apoe4[1] {
        1.0
    } else {
        2.0
    };
    let mmse = stats.mmse_mean + stats.mmse_sd * sample_standard_normal(rng);
    [age, gender, ravlt, apoe4, mmse]
}

/// Outcome model: a change score responding to exposure and baseline state.
fn outcome(theta: f64, treated: bool, covs: &[f64; 5], noise: f64) -> f64 {
    let [age, gender, ravlt, apoe4, mmse] = covs;
    theta * if treated { 1.0 } else { 0.0 } + 0.04 * (age - 74.0)
        - 0.30 * gender
        - 0.12 * (ravlt - 14.0)
        + 0.80 * apoe4
        - 0.35 * (mmse - 27.0)
        + noise
}

/// Generates the synthetic dataset. Deterministic in the seed: the stream is
/// consumed in a fixed per-subject order (covariates, assignment draw,
/// outcome noise), current cohort first.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, 0);

    let external_stats = match cfg.populations {
        Populations::Matched => &CURRENT_STATS,
        Populations::Shifted => &EXTERNAL_STATS,
    };

    let n = cfg.n_current;
    let mut covs = Vec::with_capacity(n);
    let mut assign = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        covs.push(draw_covariates(&CURRENT_STATS, &mut rng));
        assign.push(rng.gen::<f64>());
        noise.push(cfg.noise_sd * sample_standard_normal(&mut rng));
    }

    // exact exposed count: the subjects with the largest assignment draws
    let k = cfg.n_treated();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        assign[b]
            .partial_cmp(&assign[a])
            .expect("uniform draws are finite")
            .then(a.cmp(&b))
    });
    let mut treated = vec![false; n];
    for &i in order.iter().take(k) {
        treated[i] = true;
    }

    let mut ext_covs = Vec::with_capacity(cfg.n_external);
    let mut ext_noise = Vec::with_capacity(cfg.n_external);
    for _ in 0..cfg.n_external {
        ext_covs.push(draw_covariates(external_stats, &mut rng));
        ext_noise.push(cfg.noise_sd * sample_standard_normal(&mut rng));
    }

    let build = |rows: Vec<(&[f64; 5], f64)>| -> Result<(ArmData, DMatrix<f64>)> {
        let covs = DMatrix::from_fn(rows.len(), 5, |i, j| rows[i].0[j]);
        let y = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        Ok((ArmData::with_intercept(&covs, y)?, covs))
    };

    let treated_rows: Vec<(&[f64; 5], f64)> = (0..n)
        .filter(|&i| treated[i])
        .map(|i| (&covs[i], outcome(cfg.theta, true, &covs[i], noise[i])))
        .collect();
    let control_rows: Vec<(&[f64; 5], f64)> = (0..n)
        .filter(|&i| !treated[i])
        .map(|i| (&covs[i], outcome(cfg.theta, false, &covs[i], noise[i])))
        .collect();
    let external_rows: Vec<(&[f64; 5], f64)> = (0..cfg.n_external)
        .map(|i| {
            (
                &ext_covs[i],
                outcome(cfg.theta, false, &ext_covs[i], ext_noise[i]),
            )
        })
        .collect();

    let (treatment, covs_treatment) = build(treated_rows)?;
    let (control, covs_control) = build(control_rows)?;
    let (external, covs_external) = build(external_rows)?;

    Ok(Dataset {
        treatment,
        control,
        external: Some(external),
        covs_treatment,
        covs_control,
        covs_external,
        covariate_names: FixtureConfig::COVARIATES
            .iter()
            .map(|s| s.to_string())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_exact_exposure_count() {
        let cfg = FixtureConfig::new(1);
        let d = generate_fixture(&cfg).unwrap();
        assert_eq!(d.n_treated(), 338, "round(531 * 0.6365)");
        assert_eq!(d.n_control(), 193);
        assert_eq!(d.n_external(), 710);
        assert_eq!(d.covariate_names, FixtureConfig::COVARIATES);
    }

    #[test]
    fn covariate_marginals_match_the_targets() {
        let mut cfg = FixtureConfig::new(2);
        cfg.n_current = 20_000;
        cfg.n_external = 20_000;
        cfg.populations = Populations::Shifted;
        let d = generate_fixture(&cfg).unwrap();

        let col_mean = |m: &DMatrix<f64>, j: usize| -> f64 {
            (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>() / m.nrows() as f64
        };
        // pooled current age / gender / mmse
        let n_cur = (d.n_treated() + d.n_control()) as f64;
        let age_cur = (col_mean(&d.covs_treatment, 0) * d.n_treated() as f64
            + col_mean(&d.covs_control, 0) * d.n_control() as f64)
            / n_cur;
        assert!((age_cur - 73.19).abs() < 0.2, "current age mean {age_cur}");
        let age_ext = col_mean(&d.covs_external, 0);
        assert!((age_ext - 75.27).abs() < 0.2, "external age mean {age_ext}");
        let male_ext = col_mean(&d.covs_external, 1);
        assert!(
            (male_ext - 0.5775).abs() < 0.02,
            "external male rate {male_ext}"
        );
        let apoe_ext = col_mean(&d.covs_external, 3);
        let want_apoe = 0.3775 + 2.0 * 0.1084;
        assert!(
            (apoe_ext - want_apoe).abs() < 0.03,
            "external allele mean {apoe_ext}"
        );

        // matched mode pulls the external cohort onto the current population
        cfg.populations = Populations::Matched;
        let dm = generate_fixture(&cfg).unwrap();
        let age_ext_m = col_mean(&dm.covs_external, 0);
        assert!(
            (age_ext_m - 73.19).abs() < 0.2,
            "matched external age mean {age_ext_m}"
        );
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = FixtureConfig::new(5);
        let a = generate_fixture(&cfg).unwrap();
        let b = generate_fixture(&cfg).unwrap();
        assert_eq!(a.treatment.y[0].to_bits(), b.treatment.y[0].to_bits());
        assert_eq!(
            a.covs_external[(3, 0)].to_bits(),
            b.covs_external[(3, 0)].to_bits()
        );
        let c = generate_fixture(&FixtureConfig::new(6)).unwrap();
        assert_ne!(a.treatment.y[0].to_bits(), c.treatment.y[0].to_bits());
    }

    #[test]
    fn noiseless_outcomes_follow_the_stated_model() {
        let mut cfg = FixtureConfig::new(7);
        cfg.noise_sd = 0.0;
        cfg.n_current = 50;
        cfg.n_external = 20;
        let d = generate_fixture(&cfg).unwrap();
        for i in 0..d.n_treated() {
            let c = &d.covs_treatment;
            let covs = [c[(i, 0)], c[(i, 1)], c[(i, 2)], c[(i, 3)], c[(i, 4)]];
            let want = outcome(cfg.theta, true, &covs, 0.0);
            assert!((d.treatment.y[i] - want).abs() < 1e-12);
        }
        for i in 0..d.n_external() {
            let c = &d.covs_external;
            let covs = [c[(i, 0)], c[(i, 1)], c[(i, 2)], c[(i, 3)], c[(i, 4)]];
            let want = outcome(cfg.theta, false, &covs, 0.0);
            assert!((d.external.as_ref().unwrap().y[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation_and_analysis_binding() {
        let mut cfg = FixtureConfig::new(1);
        cfg.exposure_rate = 1.2;
        assert!(generate_fixture(&cfg).is_err());
        cfg.exposure_rate = 0.999;
        cfg.n_current = 10;
        // round(10 * 0.999) = 10 leaves no controls
        assert!(generate_fixture(&cfg).is_err());

        let cfg = FixtureConfig::new(9);
        let analysis = cfg.analysis_config();
        analysis.validate().unwrap();
        assert_eq!(analysis.covariate_columns.len(), 5);
        assert_eq!(analysis.seed, 9);
    }

    #[test]
    fn population_modes_parse() {
        assert_eq!(
            "matched".parse::<Populations>().unwrap(),
            Populations::Matched
        );
        assert_eq!(
            "SHIFTED".parse::<Populations>().unwrap(),
            Populations::Shifted
        );
        assert!("wide".parse::<Populations>().is_err());
    }
}
