//! Per-arm regression summaries.
//!
//! Each arm is summarized by the least-squares quantities the conjugate
//! posterior consumes: `theta_hat`, `X'X`, and a residual variance with the
//! `n - 1` divisor, plus the raw outcome mean/variance used by the
//! plausibility indices. External controls get the weighted analogue with
//! `W = diag(w)` and the effective sample size in place of the raw count.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{ensure, Error, Result};
use crate::propensity::WeightVector;

/// Outcomes and design matrix for one arm. The design includes its leading
/// intercept column.
#[derive(Debug, Clone)]
pub struct ArmData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl ArmData {
    /// Validates shape and finiteness. Identifiability is not required here:
    /// an underdetermined arm (fewer rows than columns) is constructible but
    /// its least-squares summary will fail with a rank error, which lets
    /// callers fall back to not borrowing from a too-small external arm.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        ensure!(
            x.nrows() == y.len(),
            "design has {} rows but {} outcomes",
            x.nrows(),
            y.len()
        );
        ensure!(x.ncols() >= 1, "design needs at least one column");
        if x.nrows() < 1 {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        ensure!(
            x.iter().all(|v| v.is_finite()) && y.iter().all(|v| v.is_finite()),
            "arm data contains a non-finite value"
        );
        Ok(ArmData { x, y })
    }

    /// Builds the design `[1, covariates]` from a covariate block.
    pub fn with_intercept(covariates: &DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = covariates.nrows();
        let mut x = DMatrix::zeros(n, covariates.ncols() + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 0..covariates.ncols() {
                x[(i, j + 1)] = covariates[(i, j)];
            }
        }
        ArmData::new(x, y)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }
}

/// Least-squares summary of one arm.
#[derive(Debug, Clone)]
pub struct ArmSummary {
    /// OLS coefficients.
    pub theta_hat: DVector<f64>,
    /// Cross-product `X'X`.
    pub xtx: DMatrix<f64>,
    /// Residual variance with divisor `n - 1`.
    pub s2: f64,
    /// Number of subjects.
    pub n: usize,
    /// Raw outcome mean.
    pub ybar: f64,
    /// Raw outcome variance (divisor `n - 1`).
    pub sc2_raw: f64,
}

/// Weighted least-squares summary of the external controls.
#[derive(Debug, Clone)]
pub struct WeightedSummary {
    /// WLS coefficients `(X'WX)^-1 X'Wy`.
    pub theta_hat_w: DVector<f64>,
    /// Cross-product `X'WX`.
    pub xtwx: DMatrix<f64>,
    /// Weighted residual variance, divisor `ess - 1`.
    pub s2_w: f64,
    /// Effective sample size `sum(w)`.
    pub ess: f64,
    /// Weighted outcome mean.
    pub ybar_w: f64,
    /// Weighted raw outcome variance around `ybar_w`, divisor `ess - 1`.
    pub s2_raw_w: f64,
    /// Unweighted outcome mean.
    pub ybar_raw: f64,
    /// Unweighted raw outcome variance (divisor `n_raw - 1`).
    pub s2_raw: f64,
    /// Raw external subject count.
    pub n_raw: usize,
}

fn solve_spd(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    m.clone().cholesky().ok_or(Error::RankDeficient(what))
}

/// Ordinary least-squares summary of an arm.
pub fn arm_summary(arm: &ArmData) -> Result<ArmSummary> {
    let n = arm.n();
    let xtx = arm.x.tr_mul(&arm.x);
    let chol = solve_spd(&xtx, "X'X is singular (collinear arm design)")?;
    let theta_hat = chol.solve(&arm.x.tr_mul(&arm.y));
    let resid = &arm.y - &arm.x * &theta_hat;
    let s2 = resid.norm_squared() / (n as f64 - 1.0);
    let ybar = arm.y.mean();
    let sc2_raw = arm.y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / (n as f64 - 1.0);
    Ok(ArmSummary {
        theta_hat,
        xtx,
        s2,
        n,
        ybar,
        sc2_raw,
    })
}

/// Weighted least-squares summary of the external control arm.
///
/// Requires one weight per row and `ess > 1` (otherwise the weighted variance
/// is undefined and the caller should fall back to no borrowing).
pub fn weighted_summary(arm: &ArmData, weights: &WeightVector) -> Result<WeightedSummary> {
    let n = arm.n();
    ensure!(
        weights.len() == n,
        "{} weights for {} external rows",
        weights.len(),
        n
    );
    let ess = weights.ess();
    if ess <= 1.0 {
        return Err(Error::EssTooSmall { ess });
    }
    let w = weights.weights();

    // X'WX and X'Wy in one pass
    let q = arm.q();
    let mut xtwx = DMatrix::zeros(q, q);
    let mut xtwy = DVector::zeros(q);
    for i in 0..n {
        let wi = w[i];
        for a in 0..q {
            let xa = arm.x[(i, a)];
            xtwy[a] += wi * xa * arm.y[i];
            for b in a..q {
                xtwx[(a, b)] += wi * xa * arm.x[(i, b)];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }

    let chol = solve_spd(&xtwx, "X'WX is singular (collinear external design)")?;
    let theta_hat_w = chol.solve(&xtwy);

    let denom = ess - 1.0;
    let resid = &arm.y - &arm.x * &theta_hat_w;
    let s2_w = resid.iter().zip(w).map(|(r, wi)| wi * r * r).sum::<f64>() / denom;

    let wy: f64 = arm.y.iter().zip(w).map(|(y, wi)| wi * y).sum();
    let ybar_w = wy / ess;
    let s2_raw_w = arm
        .y
        .iter()
        .zip(w)
        .map(|(y, wi)| wi * (y - ybar_w) * (y - ybar_w))
        .sum::<f64>()
        / denom;

    let ybar_raw = arm.y.mean();
    let s2_raw = arm
        .y
        .iter()
        .map(|y| (y - ybar_raw) * (y - ybar_raw))
        .sum::<f64>()
        / (n as f64 - 1.0);

    Ok(WeightedSummary {
        theta_hat_w,
        xtwx,
        s2_w,
        ess,
        ybar_w,
        s2_raw_w,
        ybar_raw,
        s2_raw,
        n_raw: n,
    })
}
