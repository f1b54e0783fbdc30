//! Plausibility indices and power-parameter calibration.
//!
//! Compatibility between the external controls and the current controls is
//! scored separately for the mean and the variance:
//!
//! * **Mean index** — a two-sample t statistic on the (weighted) external mean
//!   versus the current control mean, scaled by the current control standard
//!   error. The index is the two-sided tail mass `2 (1 - F_t(|t|))`, so it is
//!   1 when the means agree exactly and decays toward 0 as they diverge.
//! * **Variance index** — the F statistic `s2_e / s2_c` scored by its density
//!   level set: the probability that an F variate is *less plausible* than the
//!   observed ratio, `P(f(X) <= f(x0))`. The index is 1 at the mode of the F
//!   density and decays toward 0 in both tails.
//!
//! Each index is then mapped to a power parameter in `[0, 1]` by the
//! configured functional. The default halves the mean index (equivalently,
//! uses the one-sided tail) so that perfectly compatible data borrow at
//! strength 1/2 and the borrowing strength is uniformly distributed under
//! exact compatibility; `level-set` passes the index through unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid_arg, Error, Result};
use crate::special::{f_cdf, f_pdf, student_t_cdf};
use crate::summary::{ArmSummary, WeightedSummary};

/// Borrowing strengths for the mean part (`a1`) and variance part (`a2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub a1: f64,
    pub a2: f64,
}

impl PowerParams {
    pub const OFF: PowerParams = PowerParams { a1: 0.0, a2: 0.0 };

    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        ensure!(
            (0.0..=1.0).contains(&a1) && (0.0..=1.0).contains(&a2),
            "power parameters must lie in [0, 1], got a1={a1}, a2={a2}"
        );
        Ok(PowerParams { a1, a2 })
    }

    /// True when both parts are switched off and no borrowing occurs.
    pub fn is_off(&self) -> bool {
        self.a1 == 0.0 && self.a2 == 0.0
    }
}

/// Which external summaries feed the indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MpiWeighting {
    /// Propensity-weighted external mean/variance (the default pipeline).
    #[default]
    Weighted,
    /// Unweighted external mean/variance.
    Raw,
}

/// Denominator convention for the F-statistic's numerator degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MpiDof {
    /// `n_e - 1` from the raw external count (the default).
    #[default]
    Raw,
    /// `round(ess) - 1` from the effective sample size.
    Ess,
}

/// Map from index to power parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MpiFunctional {
    /// Half the index (one-sided tail for the mean part). Default.
    #[default]
    Tail,
    /// The index itself.
    LevelSet,
}

impl std::str::FromStr for MpiWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weighted" => Ok(MpiWeighting::Weighted),
            "raw" => Ok(MpiWeighting::Raw),
            other => Err(invalid_arg(format!(
                "unknown weighting '{other}' (expected weighted or raw)"
            ))),
        }
    }
}

impl std::str::FromStr for MpiDof {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(MpiDof::Raw),
            "ess" => Ok(MpiDof::Ess),
            other => Err(invalid_arg(format!(
                "unknown degrees-of-freedom rule '{other}' (expected raw or ess)"
            ))),
        }
    }
}

impl std::str::FromStr for MpiFunctional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tail" => Ok(MpiFunctional::Tail),
            "level-set" | "level_set" => Ok(MpiFunctional::LevelSet),
            other => Err(invalid_arg(format!(
                "unknown functional '{other}' (expected tail or level-set)"
            ))),
        }
    }
}

/// Calibration settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MpiConfig {
    pub weighting: MpiWeighting,
    pub dof: MpiDof,
    pub functional: MpiFunctional,
}

/// Index computations plus the calibrated power parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpiReport {
    /// Two-sample t statistic for the mean comparison.
    pub t_stat: f64,
    /// Two-sided mean plausibility index in `[0, 1]`.
    pub mpi_mean: f64,
    /// Variance ratio `s2_e / s2_c`.
    pub f_stat: f64,
    /// Variance plausibility index in `[0, 1]`.
    pub mpi_var: f64,
    /// Degrees of freedom of the t reference (`n_c - 1`).
    pub dof_mean: u32,
    /// Numerator degrees of freedom of the F reference.
    pub dof_f: u32,
    /// Calibrated borrowing strengths.
    pub params: PowerParams,
}

impl MpiReport {
    /// Report for the degenerate case (external arm too small to score):
    /// borrowing is switched off and the statistics are undefined.
    pub fn degenerate(dof_mean: u32) -> Self {
        MpiReport {
            t_stat: f64::NAN,
            mpi_mean: 0.0,
            f_stat: f64::NAN,
            mpi_var: 0.0,
            dof_mean,
            dof_f: 0,
            params: PowerParams::OFF,
        }
    }
}

/// Mean plausibility index.
///
/// `t = (ybar_c - ybar_e) / sqrt(s2_c / n_c)` referenced against a Student t
/// with `n_c - 1` degrees of freedom; returns `(t, 2 (1 - F_t(|t|)))`.
pub fn mpi_mean(ybar_c: f64, ybar_e: f64, s2_c: f64, n_c: usize) -> Result<(f64, f64)> {
    ensure!(
        n_c >= 2,
        "mean index needs at least two current controls, got {n_c}"
    );
    ensure!(
        s2_c > 0.0,
        "current control variance must be positive, got {s2_c}"
    );
    let t = (ybar_c - ybar_e) / (s2_c / n_c as f64).sqrt();
    let dof = (n_c - 1) as u32;
    let index = 2.0 * (1.0 - student_t_cdf(t.abs(), dof)?);
    Ok((t, index.clamp(0.0, 1.0)))
}

/// Variance plausibility index: the F density level-set mass at `x0`.
///
/// Returns `(x0, P(f(X) <= f(x0)))` for `X ~ F(d1, d2)`. For `d1 <= 2` the
/// density is decreasing so the level set is the upper tail `1 - F(x0)`.
/// Otherwise the companion point `x1` with `f(x1) = f(x0)` on the other side
/// of the mode is found by bisection and the mass is `F(max) - F(min)`
/// complemented.
pub fn mpi_variance(s2_e: f64, s2_c: f64, d1: u32, d2: u32) -> Result<(f64, f64)> {
    ensure!(
        s2_c > 0.0,
        "current control variance must be positive, got {s2_c}"
    );
    ensure!(
        s2_e >= 0.0,
        "external variance must be nonnegative, got {s2_e}"
    );
    ensure!(d1 >= 1 && d2 >= 1, "F degrees of freedom must be positive");
    let x0 = s2_e / s2_c;
    let index = f_level_set_mass(x0, d1, d2)?;
    Ok((x0, index))
}

/// `P(f(X) <= f(x0))` for `X ~ F(d1, d2)`.
fn f_level_set_mass(x0: f64, d1: u32, d2: u32) -> Result<f64> {
    if d1 <= 2 {
        // monotone decreasing density: level set is the upper tail
        return Ok((1.0 - f_cdf(x0, d1, d2)?).clamp(0.0, 1.0));
    }
    let mode = ((d1 as f64 - 2.0) / d1 as f64) * (d2 as f64 / (d2 as f64 + 2.0));
    if x0 <= 0.0 {
        return Ok(0.0);
    }
    let f0 = f_pdf(x0, d1, d2)?;
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    if (x0 - mode).abs() <= 1e-12 * mode.max(1.0) {
        return Ok(1.0);
    }
    // companion root of f(x) = f0 on the far side of the mode
    let x1 = companion_root(x0, f0, mode, d1, d2)?;
    let (lo, hi) = if x0 < mode { (x0, x1) } else { (x1, x0) };
    let mass = 1.0 - (f_cdf(hi, d1, d2)? - f_cdf(lo, d1, d2)?);
    Ok(mass.clamp(0.0, 1.0))
}

/// Finds `x1` on the opposite side of the mode with `f(x1) = f0`.
fn companion_root(x0: f64, f0: f64, mode: f64, d1: u32, d2: u32) -> Result<f64> {
    let g = |x: f64| -> Result<f64> { Ok(f_pdf(x, d1, d2)? - f0) };
    let (mut lo, mut hi);
    if x0 < mode {
        // companion lies above the mode: expand geometrically until below f0
        lo = mode;
        hi = mode * 2.0;
        while g(hi)? > 0.0 {
            hi *= 2.0;
            ensure!(hi.is_finite(), "level-set bracket diverged");
        }
    } else {
        // companion lies in (0, mode); density at 0+ is 0 for d1 > 2
        lo = 0.0;
        hi = mode;
    }
    // bisection: g is positive near the mode side and negative at the far end
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            // still inside the level set, move toward the far end
            if x0 < mode {
                lo = mid;
            } else {
                hi = mid;
            }
        } else if x0 < mode {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrates `(a1, a2)` from the current control and external summaries.
///
/// Falls back to no borrowing (both parameters 0) when the external arm is too
/// small to score: fewer than two raw subjects, or an effective sample size
/// too small for the chosen degrees-of-freedom convention.
pub fn calibrate_power_params(
    cur: &ArmSummary,
    ext: &WeightedSummary,
    cfg: &MpiConfig,
) -> Result<MpiReport> {
    let dof_mean = (cur.n - 1) as u32;
    if ext.n_raw < 2 {
        return Ok(MpiReport::degenerate(dof_mean));
    }
    let (ybar_e, s2_e) = match cfg.weighting {
        MpiWeighting::Weighted => (ext.ybar_w, ext.s2_raw_w),
        MpiWeighting::Raw => (ext.ybar_raw, ext.s2_raw),
    };
    let d1 = match cfg.dof {
        MpiDof::Raw => ext.n_raw as i64 - 1,
        MpiDof::Ess => ext.ess.round() as i64 - 1,
    };
    if d1 < 1 {
        return Ok(MpiReport::degenerate(dof_mean));
    }
    let (t_stat, index_mean) = mpi_mean(cur.ybar, ybar_e, cur.sc2_raw, cur.n)?;
    let (f_stat, index_var) = mpi_variance(s2_e, cur.sc2_raw, d1 as u32, dof_mean)?;
    let (a1, a2) = match cfg.functional {
        MpiFunctional::Tail => (0.5 * index_mean, 0.5 * index_var),
        MpiFunctional::LevelSet => (index_mean, index_var),
    };
    Ok(MpiReport {
        t_stat,
        mpi_mean: index_mean,
        f_stat,
        mpi_var: index_var,
        dof_mean,
        dof_f: d1 as u32,
        params: PowerParams::new(a1, a2)?,
    })
}
