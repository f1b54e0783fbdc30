//! Exact draws from the distributions the posterior needs: gamma /
//! inverse-gamma and multivariate normal. All samplers take the RNG by
//! mutable reference so callers control the stream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Error, Result};
use crate::rng::RngStream;

/// One standard normal draw.
pub fn sample_standard_normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma(shape, rate = 1) draw via Marsaglia–Tsang squeeze/rejection.
///
/// Valid for every shape > 0: shapes below one are boosted with the
/// `Gamma(shape + 1) * U^(1/shape)` identity so the rejection kernel always
/// runs with shape >= 1.
pub fn sample_gamma(rng: &mut RngStream, shape: f64) -> Result<f64> {
    ensure!(
        shape.is_finite() && shape > 0.0,
        "gamma shape must be > 0, got {shape}"
    );
    if shape < 1.0 {
        let boosted = marsaglia_tsang(rng, shape + 1.0);
        // u in (0, 1]; ln(u) stays finite
        let u: f64 = 1.0 - rng.gen::<f64>();
        return Ok(boosted * u.powf(1.0 / shape));
    }
    Ok(marsaglia_tsang(rng, shape))
}

fn marsaglia_tsang(rng: &mut RngStream, shape: f64) -> f64 {
    debug_assert!(shape >= 1.0);
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.gen();
        let x2 = x * x;
        // squeeze step accepts the bulk without a log
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Inverse-gamma(shape, scale) draw, i.e. `scale / Gamma(shape, rate = 1)`.
pub fn sample_inverse_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> Result<f64> {
    ensure!(
        scale.is_finite() && scale > 0.0,
        "inverse-gamma scale must be > 0, got {scale}"
    );
    Ok(scale / sample_gamma(rng, shape)?)
}

/// Multivariate normal draw `mean + L z` where `cov = L L'`.
///
/// The covariance must be positive semi-definite. The all-zero covariance is
/// accepted and returns the mean exactly (a degenerate but well-defined
/// posterior); any other factorization failure is reported as an invalid
/// posterior covariance.
pub fn sample_mvn(
    rng: &mut RngStream,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    ensure!(
        cov.nrows() == mean.len() && cov.ncols() == mean.len(),
        "mvn: covariance is {}x{} but mean has length {}",
        cov.nrows(),
        cov.ncols(),
        mean.len()
    );
    if cov.iter().all(|&v| v == 0.0) {
        return Ok(mean.clone());
    }
    let chol = cov.clone().cholesky().ok_or(Error::RankDeficient(
        "posterior covariance is not positive definite",
    ))?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + chol.l() * z)
}
