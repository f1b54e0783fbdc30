//! Propensity model and external-control weights.
//!
//! Membership in the current study is modeled with logistic regression fit by
//! iteratively reweighted least squares (IRLS). Scores on external subjects
//! become odds weights capped at one: `w = min(1, e / (1 - e))`, so an
//! external subject can never count for more than one current-study subject,
//! and the cap keeps near-certain "current" lookalikes from dominating.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};

/// Default IRLS iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;
/// Default IRLS convergence tolerance on the coefficient sup-norm change.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Coefficient magnitude beyond which the fit is declared separable.
const SEPARATION_COEF_BOUND: f64 = 1e6;
/// Fitted probabilities this close to their labels on every row mean the
/// likelihood is saturated (perfect separation).
const SATURATION_EPS: f64 = 1e-8;

/// Covariates plus a study-membership label per subject (1 = current study,
/// 0 = external). The design used in the fit is `[1, x]`; the intercept is
/// handled internally.
#[derive(Debug, Clone)]
pub struct CovariateMatrix {
    x: DMatrix<f64>,
    z: Vec<bool>,
}

impl CovariateMatrix {
    /// Validates shapes and finiteness. Rows with missing (non-finite) values
    /// are rejected rather than silently dropped.
    pub fn new(x: DMatrix<f64>, z: Vec<bool>) -> Result<Self> {
        ensure!(
            x.nrows() == z.len(),
            "covariate matrix has {} rows but {} labels",
            x.nrows(),
            z.len()
        );
        ensure!(x.nrows() > 0, "covariate matrix is empty");
        ensure!(x.ncols() > 0, "covariate matrix has no columns");
        ensure!(
            x.iter().all(|v| v.is_finite()),
            "covariate matrix contains a non-finite value"
        );
        Ok(CovariateMatrix { x, z })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[bool] {
        &self.z
    }
}

/// External-control weights and their effective sample size `ess = sum(w)`.
#[derive(Debug, Clone)]
pub struct WeightVector {
    w: Vec<f64>,
    ess: f64,
}

impl WeightVector {
    /// Wraps raw weights; each must lie in [0, 1].
    pub fn new(w: Vec<f64>) -> Result<Self> {
        ensure!(
            w.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)),
            "weights must lie in [0, 1]"
        );
        let ess = w.iter().sum();
        Ok(WeightVector { w, ess })
    }

    /// Unit weights (the fixed-borrowing comparator: no propensity step).
    pub fn unit(n: usize) -> Self {
        WeightVector {
            w: vec![1.0; n],
            ess: n as f64,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Fits the logistic membership model by IRLS and returns
/// `[intercept, slope_1, ..., slope_p]`.
///
/// Errors: [`Error::Separation`] when coefficients diverge or the fit
/// saturates, [`Error::SingularDesign`] when the weighted normal equations
/// cannot be solved, [`Error::NonConvergence`] when `max_iter` is exhausted.
pub fn fit_logistic(data: &CovariateMatrix, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    ensure!(max_iter > 0, "max_iter must be positive");
    ensure!(
        tol > 0.0 && tol.is_finite(),
        "tol must be a positive number"
    );
    let n = data.n_rows();
    let p = data.n_covariates() + 1;
    ensure!(
        data.z.iter().any(|&z| z) && data.z.iter().any(|&z| !z),
        "logistic fit needs both labels present"
    );

    // design with a leading intercept column
    let mut design = DMatrix::zeros(n, p);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..data.n_covariates() {
            design[(i, j + 1)] = data.x[(i, j)];
        }
    }
    let y = DVector::from_fn(n, |i, _| if data.z[i] { 1.0 } else { 0.0 });

    let mut beta = DVector::zeros(p);
    for _ in 0..max_iter {
        let eta = &design * &beta;
        let mut prob = DVector::zeros(n);
        let mut wts = DVector::zeros(n);
        for i in 0..n {
            // clamp the linear predictor so exp never overflows
            let e = eta[i].clamp(-35.0, 35.0);
            let pi = 1.0 / (1.0 + (-e).exp());
            prob[i] = pi;
            wts[i] = (pi * (1.0 - pi)).max(1e-10);
        }

        // every fitted probability at its label means the likelihood is
        // saturated: a separating hyperplane exists and the MLE diverges.
        // (Overlapping labels can never saturate every row at once, so this
        // cannot fire on a well-posed fit.)
        if beta.iter().any(|b| *b != 0.0) && (0..n).all(|i| (y[i] - prob[i]).abs() < SATURATION_EPS)
        {
            return Err(Error::Separation);
        }

        // working response z_i = eta_i + (y_i - p_i) / w_i
        let work = DVector::from_fn(n, |i, _| eta[i] + (y[i] - prob[i]) / wts[i]);

        // X' W X and X' W z
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwz = DVector::zeros(p);
        for i in 0..n {
            let wi = wts[i];
            for a in 0..p {
                let xa = design[(i, a)];
                xtwz[a] += wi * xa * work[i];
                for b in a..p {
                    xtwx[(a, b)] += wi * xa * design[(i, b)];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }

        let chol = xtwx.cholesky().ok_or(Error::SingularDesign)?;
        let next = chol.solve(&xtwz);

        if next
            .iter()
            .any(|b: &f64| !b.is_finite() || b.abs() > SEPARATION_COEF_BOUND)
        {
            return Err(Error::Separation);
        }

        let delta = (&next - &beta).amax();
        beta = next;
        if delta < tol {
            // converged; a saturated fit at convergence still means separation
            let eta = &design * &beta;
            let saturated = (0..n).all(|i| {
                let pi = 1.0 / (1.0 + (-eta[i].clamp(-35.0, 35.0)).exp());
                (y[i] - pi).abs() < SATURATION_EPS
            });
            if saturated {
                return Err(Error::Separation);
            }
            return Ok(beta.iter().copied().collect());
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
    })
}

/// Propensity scores `P(current | x)` for every row of `data` under the
/// fitted coefficients. Scores are strictly inside (0, 1) because the linear
/// predictor is clamped before the logistic transform.
pub fn propensity_scores(coefficients: &[f64], data: &CovariateMatrix) -> Result<Vec<f64>> {
    ensure!(
        coefficients.len() == data.n_covariates() + 1,
        "expected {} coefficients (intercept + slopes), got {}",
        data.n_covariates() + 1,
        coefficients.len()
    );
    ensure!(
        coefficients.iter().all(|c| c.is_finite()),
        "coefficients must be finite"
    );
    let mut scores = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let mut eta = coefficients[0];
        for j in 0..data.n_covariates() {
            eta += coefficients[j + 1] * data.x[(i, j)];
        }
        scores.push(1.0 / (1.0 + (-eta.clamp(-35.0, 35.0)).exp()));
    }
    Ok(scores)
}

/// Converts external-subject scores into capped odds weights
/// `w = min(1, e / (1 - e))`.
///
/// Scores must lie strictly inside (0, 1); they are then clipped to
/// `[1e-12, 1 - 1e-12]` so the odds stay finite.
pub fn external_weights(scores: &[f64]) -> Result<WeightVector> {
    ensure!(!scores.is_empty(), "no scores supplied");
    for (i, &s) in scores.iter().enumerate() {
        ensure!(
            s.is_finite() && s > 0.0 && s < 1.0,
            "score {s} at index {i} is outside (0, 1)"
        );
    }
    let w = scores
        .iter()
        .map(|&s| {
            let e = s.clamp(1e-12, 1.0 - 1e-12);
            (e / (1.0 - e)).min(1.0)
        })
        .collect();
    WeightVector::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(&[f64], bool)]) -> CovariateMatrix {
        let p = rows[0].0.len();
        let flat: Vec<f64> = rows.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let x = DMatrix::from_row_slice(rows.len(), p, &flat);
        let z = rows.iter().map(|&(_, z)| z).collect();
        CovariateMatrix::new(x, z).unwrap()
    }

    #[test]
    fn antisymmetric_data_gives_zero_coefficients() {
        let data = matrix(&[
            (&[1.0], true),
            (&[-1.0], false),
            (&[-1.0], true),
            (&[1.0], false),
        ]);
        let beta = fit_logistic(&data, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(
            beta.iter().all(|b| b.abs() < 1e-9),
            "perfectly balanced labels must give a null fit, got {beta:?}"
        );
    }

    #[test]
    fn recovers_known_coefficients() {
        use rand::Rng;
        // logit P(z=1) = 0.5 + 1.25 x, n large enough for tight recovery
        let mut rng = crate::rng::RngStream::new(314, 0);
        let n = 40_000;
        let mut rows = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = crate::samplers::sample_standard_normal(&mut rng);
            let p = 1.0 / (1.0 + (-(0.5 + 1.25 * x)).exp());
            rows.push(x);
            z.push(rng.gen::<f64>() < p);
        }
        let data = CovariateMatrix::new(DMatrix::from_column_slice(n, 1, &rows), z).unwrap();
        let beta = fit_logistic(&data, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(
            (beta[0] - 0.5).abs() < 0.06,
            "intercept {:.4} vs 0.5",
            beta[0]
        );
        assert!(
            (beta[1] - 1.25).abs() < 0.06,
            "slope {:.4} vs 1.25",
            beta[1]
        );
    }

    #[test]
    fn separated_data_is_rejected() {
        let data = matrix(&[
            (&[2.0], true),
            (&[3.0], true),
            (&[4.5], true),
            (&[-1.0], false),
            (&[-2.0], false),
            (&[-0.5], false),
        ]);
        match fit_logistic(&data, DEFAULT_MAX_ITER, DEFAULT_TOL) {
            Err(Error::Separation) => {}
            other => panic!("expected Separation, got {other:?}"),
        }
    }

    #[test]
    fn single_label_is_rejected() {
        let data = matrix(&[(&[1.0], true), (&[2.0], true)]);
        assert!(fit_logistic(&data, DEFAULT_MAX_ITER, DEFAULT_TOL).is_err());
    }

    #[test]
    fn row_permutation_changes_nothing_materially() {
        let rows: Vec<(Vec<f64>, bool)> = (0..60)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 1.5;
                let z = (i as f64 * 0.71).cos() > -0.2;
                (vec![x, x * x - 1.0], z)
            })
            .collect();
        let as_matrix = |order: &[usize]| {
            let flat: Vec<f64> = order
                .iter()
                .flat_map(|&i| rows[i].0.iter().copied())
                .collect();
            let z = order.iter().map(|&i| rows[i].1).collect();
            CovariateMatrix::new(DMatrix::from_row_slice(rows.len(), 2, &flat), z).unwrap()
        };
        let fwd: Vec<usize> = (0..rows.len()).collect();
        let rev: Vec<usize> = (0..rows.len()).rev().collect();
        let b1 = fit_logistic(&as_matrix(&fwd), DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let b2 = fit_logistic(&as_matrix(&rev), DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        for (a, b) in b1.iter().zip(&b2) {
            assert!(
                (a - b).abs() < 1e-10,
                "row order changed the fit: {a} vs {b}"
            );
        }
    }

    #[test]
    fn weights_cap_at_one_and_sum_to_ess() {
        // score 0.5 has odds exactly 1; above that the cap binds
        let wv = external_weights(&[0.5, 0.75, 0.25, 0.9]).unwrap();
        let w = wv.weights();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 1.0, "odds 3 must cap at 1");
        assert!(
            (w[2] - 1.0 / 3.0).abs() < 1e-12,
            "odds of score 0.25 is 1/3"
        );
        assert_eq!(w[3], 1.0);
        assert!((wv.ess() - w.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_scores_are_rejected() {
        assert!(external_weights(&[0.4, 1.0]).is_err());
        assert!(external_weights(&[0.0]).is_err());
        assert!(external_weights(&[f64::NAN]).is_err());
        assert!(external_weights(&[]).is_err());
    }

    #[test]
    fn scores_stay_strictly_inside_unit_interval() {
        let data = matrix(&[(&[500.0], true), (&[-500.0], false)]);
        let scores = propensity_scores(&[0.0, 1.0], &data).unwrap();
        assert!(
            scores.iter().all(|&s| s > 0.0 && s < 1.0),
            "clamped scores: {scores:?}"
        );
    }
}
