//! Synthetic trial generation for the operating-characteristics study.
//!
//! Each replication draws a current study of `n` subjects and an external
//! cohort of `n_external` controls. Four covariates are normal with unit
//! variance; `X1` is standard normal in every group and exists only to define
//! the treatment split — the current study's top half by `X1` is treated —
//! and is excluded from both the propensity model and the outcome designs.
//! Outcomes follow `y = beta0 + theta T + beta' (X2..X4) + eps` with
//! group-specific noise variances from the scenario row.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Result};
use crate::propensity::CovariateMatrix;
use crate::rng::RngStream;
use crate::samplers::sample_standard_normal;
use crate::scenarios::ScenarioSpec;
use crate::summary::ArmData;

/// Generation settings; defaults follow the study design.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub scenario: ScenarioSpec,
    /// Current-study size `n_t + n_c` (even).
    pub n: usize,
    /// External control count.
    pub n_external: usize,
    /// True treatment effect.
    pub theta: f64,
    /// Coefficients of `X2..X4`.
    pub beta: [f64; 3],
    /// Outcome intercept.
    pub beta0: f64,
    /// Sensitivity variant: apply `theta` to the continuous `X1` instead of
    /// the binary indicator (the arms are still split at the median).
    pub continuous_x1: bool,
}

impl GenConfig {
    pub fn new(scenario: ScenarioSpec, n: usize, n_external: usize) -> Self {
        GenConfig {
            scenario,
            n,
            n_external,
            theta: 2.0,
            beta: [1.0, 1.5, -1.3],
            beta0: 0.0,
            continuous_x1: false,
        }
    }
}

/// One generated trial, split into analysis arms.
///
/// Arm designs are `[1, X2, X3, X4]`; the propensity block stacks the current
/// study's covariates (all subjects, original order) above the external
/// cohort's, labelled `true` for current.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub treatment: ArmData,
    pub control: ArmData,
    pub external: ArmData,
    pub ps_data: CovariateMatrix,
}

impl TrialData {
    /// Covariate profile `[1, mean X2, mean X3, mean X4]` pooled over the
    /// whole current study, the reference point for effect summaries.
    pub fn pooled_profile(&self) -> DVector<f64> {
        let q = self.treatment.q();
        let mut profile = DVector::zeros(q);
        let total = (self.treatment.n() + self.control.n()) as f64;
        for arm in [&self.treatment, &self.control] {
            for i in 0..arm.n() {
                for j in 0..q {
                    profile[j] += arm.x[(i, j)];
                }
            }
        }
        profile /= total;
        profile
    }
}

/// Draws one trial. The stream is consumed in a fixed order (current
/// covariates row by row, current noise, external covariates, external
/// noise) so replications are reproducible under any schedule.
pub fn generate_trial(gen: &GenConfig, rng: &mut RngStream) -> Result<TrialData> {
    ensure!(
        gen.n >= 10 && gen.n % 2 == 0,
        "current-study size must be even and >= 10, got {}",
        gen.n
    );
    ensure!(
        gen.n_external >= 2,
        "external cohort needs >= 2 subjects, got {}",
        gen.n_external
    );
    let sc = &gen.scenario;
    ensure!(
        sc.sigma2_current >= 0.0 && sc.sigma2_external >= 0.0,
        "noise variances must be nonnegative"
    );

    let n = gen.n;
    let n_e = gen.n_external;

    // current covariates: X1 ~ N(0,1), X2..X4 ~ N(mu, 1)
    let mut cur = DMatrix::zeros(n, 4);
    for i in 0..n {
        cur[(i, 0)] = sample_standard_normal(rng);
        for j in 0..3 {
            cur[(i, j + 1)] = sc.mu_current[j] + sample_standard_normal(rng);
        }
    }
    let sigma_c = sc.sigma2_current.sqrt();
    let noise_c: Vec<f64> = (0..n)
        .map(|_| sigma_c * sample_standard_normal(rng))
        .collect();

    let mut ext = DMatrix::zeros(n_e, 4);
    for i in 0..n_e {
        ext[(i, 0)] = sample_standard_normal(rng);
        for j in 0..3 {
            ext[(i, j + 1)] = sc.mu_external[j] + sample_standard_normal(rng);
        }
    }
    let sigma_e = sc.sigma2_external.sqrt();
    let noise_e: Vec<f64> = (0..n_e)
        .map(|_| sigma_e * sample_standard_normal(rng))
        .collect();

    // treatment = top half by X1 (ties broken by row index for determinism)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cur[(b, 0)]
            .partial_cmp(&cur[(a, 0)])
            .expect("covariates are finite")
            .then(a.cmp(&b))
    });
    let mut treated = vec![false; n];
    for &i in order.iter().take(n / 2) {
        treated[i] = true;
    }

    let outcome = |row: usize, m: &DMatrix<f64>, is_treated: bool, noise: f64| -> f64 {
        let exposure = if gen.continuous_x1 {
            m[(row, 0)]
        } else if is_treated {
            1.0
        } else {
            0.0
        };
        gen.beta0
            + gen.theta * exposure
            + gen.beta[0] * m[(row, 1)]
            + gen.beta[1] * m[(row, 2)]
            + gen.beta[2] * m[(row, 3)]
            + noise
    };

    let build_arm = |rows: &[usize], m: &DMatrix<f64>, ys: &[f64]| -> Result<ArmData> {
        let mut x = DMatrix::zeros(rows.len(), 4);
        let mut y = DVector::zeros(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            x[(r, 0)] = 1.0;
            for j in 0..3 {
                x[(r, j + 1)] = m[(i, j + 1)];
            }
            y[r] = ys[i];
        }
        ArmData::new(x, y)
    };

    let y_cur: Vec<f64> = (0..n)
        .map(|i| outcome(i, &cur, treated[i], noise_c[i]))
        .collect();
    let y_ext: Vec<f64> = (0..n_e)
        .map(|i| outcome(i, &ext, false, noise_e[i]))
        .collect();

    let rows_t: Vec<usize> = (0..n).filter(|&i| treated[i]).collect();
    let rows_c: Vec<usize> = (0..n).filter(|&i| !treated[i]).collect();
    let rows_e: Vec<usize> = (0..n_e).collect();

    let treatment = build_arm(&rows_t, &cur, &y_cur)?;
    let control = build_arm(&rows_c, &cur, &y_cur)?;
    let external = build_arm(&rows_e, &ext, &y_ext)?;

    // propensity block: X2..X4 for current (all rows) then external
    let mut ps = DMatrix::zeros(n + n_e, 3);
    let mut labels = Vec::with_capacity(n + n_e);
    for i in 0..n {
        for j in 0..3 {
            ps[(i, j)] = cur[(i, j + 1)];
        }
        labels.push(true);
    }
    for i in 0..n_e {
        for j in 0..3 {
            ps[(n + i, j)] = ext[(i, j + 1)];
        }
        labels.push(false);
    }
    let ps_data = CovariateMatrix::new(ps, labels)?;

    Ok(TrialData {
        treatment,
        control,
        external,
        ps_data,
    })
}
