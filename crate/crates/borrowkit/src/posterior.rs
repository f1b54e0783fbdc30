//! Conjugate normal-inverse-gamma posteriors and effect summaries.
//!
//! Both arms admit closed-form posteriors, so draws are i.i.d.:
//!
//! * **Control with borrowing** — the external controls enter through the
//!   power prior with parts-specific strengths. The variance posterior is
//!   inverse gamma with shape `(n_c + a1 + (ess - 1) a2) / 2` and scale
//!   `((n_c - 1) s2_c + (ess - 1) a2 s2_e_w) / 2`; given the variance, the
//!   coefficients are normal with precision `X_c'X_c + a1 X_e'W X_e` around
//!   the precision-weighted blend of the two least-squares fits.
//! * **Treatment** (and control without borrowing) — the standard
//!   noninformative-limit posterior from that arm alone.
//!
//! A burn-in option is kept for interface parity with iterative samplers;
//! with i.i.d. draws it only advances the stream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::mpi::PowerParams;
use crate::rng::RngStream;
use crate::samplers::{sample_inverse_gamma, sample_standard_normal};
use crate::summary::{ArmSummary, WeightedSummary};

/// Parameters of a normal-inverse-gamma posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    /// Conditional mean of the coefficients.
    pub theta_tilde: DVector<f64>,
    /// Coefficient precision scaled by `1 / sigma2`.
    pub precision: DMatrix<f64>,
    /// Inverse-gamma shape for the variance.
    pub ig_shape: f64,
    /// Inverse-gamma scale for the variance.
    pub ig_scale: f64,
}

/// Joint draws from a posterior: one row of `theta` per retained draw.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub theta: DMatrix<f64>,
    pub sigma2: Vec<f64>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    /// Linear functional `profile' theta` evaluated at every draw.
    pub fn linear(&self, profile: &DVector<f64>) -> Result<Vec<f64>> {
        ensure!(
            profile.len() == self.theta.ncols(),
            "profile has {} entries for {} coefficients",
            profile.len(),
            self.theta.ncols()
        );
        Ok((0..self.theta.nrows())
            .map(|b| {
                (0..profile.len())
                    .map(|j| profile[j] * self.theta[(b, j)])
                    .sum()
            })
            .collect())
    }
}

/// Posterior for the control arm, optionally borrowing from the external
/// controls at the given strengths.
///
/// With `borrow` absent — or both strengths zero — the external data are not
/// touched at all and the single-arm posterior is returned, so a zeroed
/// borrowing configuration is an exact off-switch.
pub fn control_posterior_params(
    cur: &ArmSummary,
    borrow: Option<(&WeightedSummary, PowerParams)>,
) -> Result<PosteriorParams> {
    let n_c = cur.n as f64;
    let (ext, params) = match borrow {
        Some((ext, params)) if !params.is_off() => (ext, params),
        _ => {
            return Ok(PosteriorParams {
                theta_tilde: cur.theta_hat.clone(),
                precision: cur.xtx.clone(),
                ig_shape: n_c / 2.0,
                ig_scale: (n_c - 1.0) * cur.s2 / 2.0,
            });
        }
    };
    if ext.ess <= 1.0 {
        return Err(Error::EssTooSmall { ess: ext.ess });
    }
    let PowerParams { a1, a2 } = params;
    let precision = &cur.xtx + &ext.xtwx * a1;
    let rhs = &cur.xtx * &cur.theta_hat + (&ext.xtwx * &ext.theta_hat_w) * a1;
    let chol = precision.clone().cholesky().ok_or(Error::RankDeficient(
        "combined posterior precision is not positive definite",
    ))?;
    let theta_tilde = chol.solve(&rhs);
    let ig_shape = (n_c + a1 + (ext.ess - 1.0) * a2) / 2.0;
    let ig_scale = ((n_c - 1.0) * cur.s2 + (ext.ess - 1.0) * a2 * ext.s2_w) / 2.0;
    Ok(PosteriorParams {
        theta_tilde,
        precision,
        ig_shape,
        ig_scale,
    })
}

/// Posterior for a single arm on its own data.
pub fn treatment_posterior_params(arm: &ArmSummary) -> Result<PosteriorParams> {
    let n = arm.n as f64;
    ensure!(
        arm.n >= 2,
        "posterior needs at least two subjects, got {}",
        arm.n
    );
    Ok(PosteriorParams {
        theta_tilde: arm.theta_hat.clone(),
        precision: arm.xtx.clone(),
        ig_shape: (n - 1.0) / 2.0,
        ig_scale: (n - 1.0) * arm.s2 / 2.0,
    })
}

/// Draws `draws` i.i.d. samples after discarding `burn_in` from the stream.
///
/// Per draw: `sigma2 ~ IG(shape, scale)`, then `theta = theta_tilde +
/// sqrt(sigma2) * L^-T z` where `precision = L L'` and `z` is standard
/// normal, giving the conditional covariance `sigma2 * precision^-1`.
pub fn sample_posterior(
    params: &PosteriorParams,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    ensure!(draws >= 1, "at least one posterior draw is required");
    ensure!(
        params.ig_shape > 0.0,
        "inverse-gamma shape must be positive"
    );
    ensure!(
        params.ig_scale > 0.0,
        "inverse-gamma scale must be positive"
    );
    let q = params.theta_tilde.len();
    ensure!(
        params.precision.nrows() == q && params.precision.ncols() == q,
        "precision is {}x{} for {} coefficients",
        params.precision.nrows(),
        params.precision.ncols(),
        q
    );
    let chol = params
        .precision
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficient(
            "posterior precision is not positive definite",
        ))?;
    let l = chol.l();

    let mut theta = DMatrix::zeros(draws, q);
    let mut sigma2 = Vec::with_capacity(draws);
    let mut z = DVector::zeros(q);
    for b in 0..burn_in + draws {
        let s2 = sample_inverse_gamma(rng, params.ig_shape, params.ig_scale)?;
        for j in 0..q {
            z[j] = sample_standard_normal(rng);
        }
        if b < burn_in {
            continue;
        }
        // u solves L' u = z so that Cov(u) = precision^-1
        let u = l.tr_solve_lower_triangular(&z).ok_or(Error::RankDeficient(
            "posterior Cholesky factor is singular",
        ))?;
        let s = s2.sqrt();
        let row = b - burn_in;
        for j in 0..q {
            theta[(row, j)] = params.theta_tilde[j] + s * u[j];
        }
        sigma2.push(s2);
    }
    Ok(PosteriorDraws { theta, sigma2 })
}

/// Control-arm draws, borrowing when `borrow` carries nonzero strengths.
pub fn sample_control_posterior(
    cur: &ArmSummary,
    borrow: Option<(&WeightedSummary, PowerParams)>,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    let params = control_posterior_params(cur, borrow)?;
    sample_posterior(&params, draws, burn_in, rng)
}

/// Treatment-arm draws from that arm's own posterior.
pub fn sample_treatment_posterior(
    arm: &ArmSummary,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    let params = treatment_posterior_params(arm)?;
    sample_posterior(&params, draws, burn_in, rng)
}

/// Posterior summary of a treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    /// Posterior mean of the effect.
    pub mean: f64,
    /// Posterior standard deviation.
    pub sd: f64,
    /// Lower bound of the equal-tailed 95% credible interval.
    pub lower95: f64,
    /// Upper bound of the equal-tailed 95% credible interval.
    pub upper95: f64,
    /// Interval width.
    pub width: f64,
    /// Posterior probability that the effect is positive.
    pub prob_positive: f64,
    /// Effective number of external subjects borrowed.
    pub ess_borrowed: f64,
    /// Borrowing strengths in force.
    pub power_params: PowerParams,
}

/// Linear interpolation quantile on sorted data (the convention used by
/// mainstream statistical software for sample quantiles).
pub(crate) fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Summarizes the effect `profile' (theta_t - theta_c)` across paired draws.
pub fn effect_summary(
    treatment: &PosteriorDraws,
    control: &PosteriorDraws,
    profile: &DVector<f64>,
    ess_borrowed: f64,
    params: PowerParams,
) -> Result<EffectSummary> {
    ensure!(
        treatment.len() == control.len(),
        "treatment has {} draws but control has {}",
        treatment.len(),
        control.len()
    );
    ensure!(
        treatment.len() >= 2,
        "effect summary needs at least two draws"
    );
    let dt = treatment.linear(profile)?;
    let dc = control.linear(profile)?;
    let deltas: Vec<f64> = dt.iter().zip(&dc).map(|(t, c)| t - c).collect();

    let b = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / b;
    let sd = (deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (b - 1.0)).sqrt();
    let prob_positive = deltas.iter().filter(|d| **d > 0.0).count() as f64 / b;

    let mut sorted = deltas;
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("posterior draws are finite"));
    let lower95 = quantile_type7(&sorted, 0.025);
    let upper95 = quantile_type7(&sorted, 0.975);

    Ok(EffectSummary {
        mean,
        sd,
        lower95,
        upper95,
        width: upper95 - lower95,
        prob_positive,
        ess_borrowed,
        power_params: params,
    })
}
