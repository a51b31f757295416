//! Adaptive Simpson quadrature and Gaussian distribution helpers.

use libm::erfc;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF of `N(0, variance)`.
pub fn gaussian_cdf(x: f64, variance: f64) -> f64 {
    normal_cdf(x / variance.sqrt())
}

/// `∫_a^b f` by adaptive Simpson with absolute tolerance `tol`.
///
/// Returns `None` when the recursion depth limit is hit before the
/// tolerance is met on some subinterval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-12 {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?,
    )
}

/// `∫_a^b f` split into `pieces` equal panels, each integrated adaptively.
/// Splitting first keeps oscillatory integrands from fooling the initial
/// error estimate.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    pieces: usize,
    tol: f64,
) -> Option<f64> {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + h * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + h };
        total += adaptive_simpson(&f, lo, hi, tol / pieces as f64)?;
    }
    Some(total)
}

/// Probability that a centred bivariate Gaussian with covariance
/// `[[s11, s12], [s12, s22]]` lies in the box `(lo, hi]`. Bounds may be
/// infinite. Requires `s11 > 0` and a positive conditional variance.
pub fn gaussian_box_2d(cov: [[f64; 2]; 2], lo: [f64; 2], hi: [f64; 2], tol: f64) -> Option<f64> {
    let s11 = cov[0][0];
    let s12 = cov[0][1];
    let s22 = cov[1][1];
    let cond = s22 - s12 * s12 / s11;
    if s11 <= 0.0 || cond <= 0.0 {
        return None;
    }
    let sd1 = s11.sqrt();
    let sdc = cond.sqrt();
    // Beyond twelve standard deviations the marginal density is below 1e-31.
    let a = lo[0].max(-12.0 * sd1);
    let b = hi[0].min(12.0 * sd1);
    if a >= b {
        return Some(0.0);
    }
    let density = |x: f64| (-(x * x) / (2.0 * s11)).exp() / (sd1 * (2.0 * std::f64::consts::PI).sqrt());
    let inner = |x: f64| {
        let mu = s12 / s11 * x;
        let upper = if hi[1].is_infinite() { 1.0 } else { normal_cdf((hi[1] - mu) / sdc) };
        let lower = if lo[1].is_infinite() { 0.0 } else { normal_cdf((lo[1] - mu) / sdc) };
        density(x) * (upper - lower)
    };
    integrate_panels(inner, a, b, 48, tol)
}
