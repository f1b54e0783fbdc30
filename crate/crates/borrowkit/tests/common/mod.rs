//! Independent oracles shared by the integration-test binaries.
//!
//! Everything here is deliberately implemented *differently* from the library:
//! distribution functions come from adaptive quadrature of textbook density
//! representations (no incomplete-beta machinery), the incomplete gamma comes
//! from its own series/continued-fraction pair with a Stirling log-gamma, and
//! the logistic oracle maximizes the exact log-likelihood by brute-force grid
//! refinement. Agreement between these and the library is evidence, not
//! tautology.

#![allow(dead_code)]

/// Adaptive Simpson quadrature with the classic (S_fine - S_coarse)/15
/// error estimate.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Student t CDF by quadrature of the density in its trigonometric form.
///
/// Substituting `s = sqrt(v) tan(h)` in the kernel `(1 + s^2/v)^-(v+1)/2`
/// gives `sqrt(v) cos(h)^(v-1) dh`, a bounded smooth integrand on
/// `[0, pi/2)`; the normalizer is the same integral to `pi/2`. No gamma
/// functions, no incomplete beta.
pub fn t_cdf_oracle(t: f64, dof: u32) -> f64 {
    assert!(dof >= 1);
    if t < 0.0 {
        return 1.0 - t_cdf_oracle(-t, dof);
    }
    let v = dof as f64;
    let kernel = move |h: f64| h.cos().powf(v - 1.0);
    let norm = adaptive_simpson(&kernel, 0.0, std::f64::consts::FRAC_PI_2, 1e-13);
    let phi = (t / v.sqrt()).atan();
    let part = adaptive_simpson(&kernel, 0.0, phi, 1e-13);
    0.5 + 0.5 * part / norm
}

/// Adaptive quadrature summed over fixed equal segments — robust against
/// integrands whose support is much narrower than the full interval, which
/// the plain adaptive rule can step straight across.
pub fn segmented_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, segments: usize) -> f64 {
    let h = (b - a) / segments as f64;
    (0..segments)
        .map(|k| adaptive_simpson(f, a + k as f64 * h, a + (k + 1) as f64 * h, tol))
        .sum()
}

/// Regularized incomplete beta `I_x(a, b)` by quadrature of the beta density
/// in its trigonometric form: `y = sin(h)^2` turns `y^(a-1) (1-y)^(b-1) dy`
/// into `sin(h)^(2a-1) cos(h)^(2b-1) dh` (up to a constant that cancels in
/// the ratio), bounded for `a, b >= 1/2` — always true for halved degrees of
/// freedom. The integrand is rescaled by its peak value so large exponents
/// cannot underflow, and both integrals run over fixed segments so a narrow
/// peak cannot slip between quadrature probes.
pub fn beta_cdf_oracle(x: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x));
    assert!(a >= 0.5 && b >= 0.5, "halved dofs are at least 1/2");
    let pa = 2.0 * a - 1.0;
    let pb = 2.0 * b - 1.0;
    // log kernel with the 0 * ln(0) = 0 convention at the endpoints
    let logk = move |h: f64| {
        let s = if pa == 0.0 { 0.0 } else { pa * h.sin().ln() };
        let c = if pb == 0.0 { 0.0 } else { pb * h.cos().ln() };
        s + c
    };
    // the kernel peaks where sin^2(h) = pa / (pa + pb)
    let peak = if pa + pb == 0.0 {
        std::f64::consts::FRAC_PI_4
    } else {
        (pa / (pa + pb)).sqrt().asin()
    };
    let log_max = logk(peak);
    let kernel = move |h: f64| (logk(h) - log_max).exp();
    let norm = segmented_simpson(&kernel, 0.0, std::f64::consts::FRAC_PI_2, 1e-13, 32);
    let part = segmented_simpson(&kernel, 0.0, x.sqrt().asin(), 1e-13, 32);
    (part / norm).clamp(0.0, 1.0)
}

/// F CDF via the beta quadrature oracle.
pub fn f_cdf_oracle(x: f64, d1: u32, d2: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    beta_cdf_oracle(d1 * x / (d1 * x + d2), 0.5 * d1, 0.5 * d2)
}

/// Log-gamma from the Stirling series after shifting the argument above 18;
/// the first omitted term is below 1e-16 there. Independent of the library's
/// Lanczos fit.
pub fn ln_gamma_oracle(mut x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    while x < 18.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Regularized lower incomplete gamma `P(a, x)`: power series below `a + 1`,
/// Lentz continued fraction for `Q(a, x)` above.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma_oracle(a);
    if x < a + 1.0 {
        // series: P = e^prefix * sum_{n>=0} x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 1.0;
        while term.abs() > sum.abs() * 1e-16 {
            term *= x / (a + n);
            sum += term;
            n += 1.0;
            assert!(n < 10_000.0, "gamma series failed to converge");
        }
        (log_prefix.exp() * sum).clamp(0.0, 1.0)
    } else {
        // modified Lentz on the continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Inverse-gamma CDF: `P(X <= x) = Q(shape, scale / x)`.
pub fn inverse_gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - reg_lower_gamma(shape, scale / x)
}

/// Two-sided Kolmogorov–Smirnov statistic of a sorted sample against a CDF.
pub fn ks_statistic(sorted: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    d
}

/// Exact logistic log-likelihood with an intercept:
/// `sum_i [z_i eta_i - ln(1 + e^(eta_i))]`, stably evaluated.
pub fn logistic_loglik(b0: f64, b1: f64, xs: &[f64], zs: &[bool]) -> f64 {
    xs.iter()
        .zip(zs)
        .map(|(&x, &z)| {
            let eta = b0 + b1 * x;
            let y = if z { 1.0 } else { 0.0 };
            y * eta - (eta.max(0.0) + (-eta.abs()).exp().ln_1p())
        })
        .sum()
}

/// Brute-force maximum-likelihood estimate by staged dense grid search over
/// `(intercept, slope)`. Final grid step 1.25e-5 per axis, so the returned
/// point is within ~6.3e-6 of the grid-restricted optimum.
pub fn grid_search_logistic(xs: &[f64], zs: &[bool]) -> (f64, f64) {
    let mut center = (0.0, 0.0);
    let mut half = 8.0;
    let mut best = (0.0, 0.0);
    for _stage in 0..6 {
        let steps = 40;
        let mut best_ll = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let b0 = center.0 - half + 2.0 * half * i as f64 / steps as f64;
                let b1 = center.1 - half + 2.0 * half * j as f64 / steps as f64;
                let ll = logistic_loglik(b0, b1, xs, zs);
                if ll > best_ll {
                    best_ll = ll;
                    best = (b0, b1);
                }
            }
        }
        center = best;
        // next stage brackets the current best by one step on each side
        half = 2.0 * (2.0 * half / steps as f64);
    }
    best
}

/// Sample mean.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median of an unsorted slice (averaging the middle pair for even lengths).
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    assert!(n > 0);
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod oracle_self_checks {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials_exactly_enough() {
        let f = |x: f64| 3.0 * x * x;
        assert!((adaptive_simpson(&f, 0.0, 2.0, 1e-13) - 8.0).abs() < 1e-12);
        let g = |x: f64| x.exp();
        assert!(
            (adaptive_simpson(&g, 0.0, 1.0, 1e-13) - (std::f64::consts::E - 1.0)).abs() < 1e-12
        );
    }

    #[test]
    fn t_oracle_matches_closed_forms() {
        // dof 1 is Cauchy: F(t) = 1/2 + atan(t)/pi
        for &t in &[-3.0f64, -0.7, 0.0, 0.4, 2.2, 8.0] {
            let want = 0.5 + t.atan() / std::f64::consts::PI;
            assert!((t_cdf_oracle(t, 1) - want).abs() < 1e-11, "t={t}");
        }
        // dof 2 has the closed form 1/2 + t / (2 sqrt(2 + t^2))
        for &t in &[-1.5f64, 0.3, 4.0] {
            let want = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert!((t_cdf_oracle(t, 2) - want).abs() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn f_oracle_matches_closed_forms() {
        // F(2, 2) has CDF x / (1 + x)
        for &x in &[0.2, 1.0, 3.7] {
            assert!(
                (f_cdf_oracle(x, 2, 2) - x / (1.0 + x)).abs() < 1e-11,
                "x={x}"
            );
        }
        // F(1, 1): CDF = 2/pi * atan(sqrt(x))
        for &x in &[0.5f64, 2.0] {
            let want = 2.0 / std::f64::consts::PI * x.sqrt().atan();
            assert!((f_cdf_oracle(x, 1, 1) - want).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn f_oracle_survives_large_degrees_of_freedom() {
        // X ~ F(d, d) implies 1/X ~ F(d, d), so the CDF at 1 is exactly 1/2
        for &d in &[9u32, 49, 99] {
            let got = f_cdf_oracle(1.0, d, d);
            assert!((got - 0.5).abs() < 1e-10, "d={d}: {got}");
        }
        // reciprocal identity: P(F(d1,d2) <= x) = 1 - P(F(d2,d1) <= 1/x)
        for &(d1, d2, x) in &[(49u32, 99u32, 0.8f64), (9, 39, 2.4), (49, 39, 1.3)] {
            let lhs = f_cdf_oracle(x, d1, d2);
            let rhs = 1.0 - f_cdf_oracle(1.0 / x, d2, d1);
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "({d1},{d2}) at {x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn gamma_oracles_match_closed_forms() {
        assert!((ln_gamma_oracle(1.0)).abs() < 1e-13);
        assert!((ln_gamma_oracle(5.0) - 24.0_f64.ln()).abs() < 1e-12);
        assert!((ln_gamma_oracle(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
        // P(1, x) = 1 - e^-x
        for &x in &[0.1, 1.0, 4.0] {
            assert!((reg_lower_gamma(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-13);
        }
        // chi-square with 2 dof: P(1, x) at a = 1 covered above; exponential
        // tail of the inverse gamma: IG(1, b) has CDF e^(-b/x)
        for &x in &[0.5, 2.0, 9.0] {
            assert!((inverse_gamma_cdf(x, 1.0, 3.0) - (-3.0_f64 / x).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_search_finds_a_hand_checkable_optimum() {
        // two design points with mixed labels at each: the two-parameter fit
        // is saturated, so the fitted probabilities equal the empirical
        // frequencies: sigma(b0 + b1) = 2/3 and sigma(b0 - b1) = 1/3, giving
        // the closed form b0 = 0, b1 = ln 2.
        let xs = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let zs = [true, true, false, false, false, true];
        let (b0, b1) = grid_search_logistic(&xs, &zs);
        assert!(b0.abs() < 1e-4, "b0={b0}");
        assert!((b1 - 2.0f64.ln()).abs() < 1e-4, "b1={b1}");
        // the grid optimum cannot be beaten by nudging
        let ll = logistic_loglik(b0, b1, &xs, &zs);
        for (d0, d1) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.0, -0.01)] {
            assert!(logistic_loglik(b0 + d0, b1 + d1, &xs, &zs) <= ll + 1e-9);
        }
    }
}
