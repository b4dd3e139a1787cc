//! Special functions: the Gaussian tail `Q`, regularised incomplete beta and
//! gamma functions, spherical-cap probabilities and the noncentral
//! chi-square distribution.
//!
//! Everything that can reach far into a tail is computed in the log domain.
//! `Ψ_sp(k, p)` is already `1e-150` at `k = 512`.

use crate::error::{bail, Result};

const FPMIN: f64 = 1e-300;
const EPS: f64 = 1e-16;
const MAX_CF_ITER: usize = 100_000;
/// Iteration cap for the Poisson mixture of the noncentral chi-square.
pub const NCX2_MAX_TERMS: usize = 1_000_000;

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// Gaussian complementary CDF, `Q(x) = P(N(0,1) > x)`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Inverse of [`qfunc`] on `(0, 1)`.
///
/// Acklam's rational approximation of the normal quantile, polished with
/// Halley steps against `erfc`.
pub fn qfunc_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        bail!(Domain, "qfunc_inv needs p in (0,1), got {p}");
    }
    let mut z = -acklam_quantile(p);
    for _ in 0..3 {
        let e = qfunc(z) - p;
        let pdf = normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        let u = e / pdf;
        let step = u / (1.0 - 0.5 * z * u);
        z += step;
        if libm::fabs(step) <= 1e-15 * libm::fabs(z).max(1.0) {
            break;
        }
    }
    Ok(z)
}

fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(libm::sqrt(-2.0 * libm::log(p)))
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(libm::sqrt(-2.0 * libm::log1p(-p)))
    }
}

/// Logarithms of a probability and of its complement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LnTails {
    /// `ln P(X ≤ x)` (or `ln P(event)`).
    pub lower: f64,
    /// `ln P(X > x)` (or `ln P(not event)`).
    pub upper: f64,
}

impl LnTails {
    fn from_lower(lower: f64) -> Self {
        LnTails { lower, upper: ln_one_minus_exp(lower) }
    }

    fn from_upper(upper: f64) -> Self {
        LnTails { lower: ln_one_minus_exp(upper), upper }
    }

    fn swap(self) -> Self {
        LnTails { lower: self.upper, upper: self.lower }
    }
}

/// `ln(1 - e^x)` for `x ≤ 0`.
#[inline]
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -core::f64::consts::LN_2 {
        libm::log(-libm::expm1(x))
    } else {
        libm::log1p(-libm::exp(x))
    }
}

/// Running `ln Σ e^{t_i}` without overflow.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub(crate) fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term > self.max {
            self.scaled = self.scaled * libm::exp(self.max - term) + 1.0;
            self.max = term;
        } else {
            self.scaled += libm::exp(term - self.max);
        }
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + libm::log(self.scaled)
        }
    }
}

/// Regularised incomplete beta `I_x(a, b)` and its complement, in logs.
pub fn ln_incbeta(a: f64, b: f64, x: f64) -> Result<LnTails> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        bail!(Domain, "incomplete beta needs a,b > 0 and x in [0,1] (a={a}, b={b}, x={x})");
    }
    ln_incbeta_pair(a, b, x, 1.0 - x)
}

/// As [`ln_incbeta`] with `y = 1 − x` supplied exactly by the caller.
pub(crate) fn ln_incbeta_pair(a: f64, b: f64, x: f64, y: f64) -> Result<LnTails> {
    if x <= 0.0 {
        return Ok(LnTails { lower: f64::NEG_INFINITY, upper: 0.0 });
    }
    if y <= 0.0 {
        return Ok(LnTails { lower: 0.0, upper: f64::NEG_INFINITY });
    }
    let ln_front = a * libm::log(x) + b * libm::log(y) - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let cf = beta_cf(a, b, x)?;
        Ok(LnTails::from_lower(ln_front + libm::log(cf) - libm::log(a)))
    } else {
        let cf = beta_cf(b, a, y)?;
        Ok(LnTails::from_upper(ln_front + libm::log(cf) - libm::log(b)))
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_CF_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < EPS {
            return Ok(h);
        }
    }
    bail!(Numerical, "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")
}

/// Regularised incomplete gamma `P(a, x)` and `Q(a, x)`, in logs.
pub fn ln_incgamma(a: f64, x: f64) -> Result<LnTails> {
    if !(a > 0.0) || x < 0.0 || x.is_nan() {
        bail!(Domain, "incomplete gamma needs a > 0 and x >= 0 (a={a}, x={x})");
    }
    if x == 0.0 {
        return Ok(LnTails { lower: f64::NEG_INFINITY, upper: 0.0 });
    }
    if x == f64::INFINITY {
        return Ok(LnTails { lower: 0.0, upper: f64::NEG_INFINITY });
    }
    let ln_front = a * libm::log(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_CF_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if libm::fabs(del) < libm::fabs(sum) * EPS {
                return Ok(LnTails::from_lower(ln_front + libm::log(sum)));
            }
        }
        bail!(Numerical, "incomplete gamma series did not converge (a={a}, x={x})")
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_CF_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if libm::fabs(d) < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if libm::fabs(c) < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if libm::fabs(del - 1.0) < EPS {
                return Ok(LnTails::from_upper(ln_front + libm::log(h)));
            }
        }
        bail!(Numerical, "incomplete gamma continued fraction did not converge (a={a}, x={x})")
    }
}

/// Noncentral chi-square CDF with `dof` degrees of freedom and
/// noncentrality `lambda`, as `ln P(X ≤ x)` and `ln P(X > x)`.
///
/// Poisson(λ/2) mixture of central chi-square laws. Past the Poisson mode
/// the term ratio is at most `r = (λ/2)/(j+1) < 1`, so the remainder after
/// term `j` is bounded by `term_j · r/(1-r)`; summation stops once that bound
/// is below `1e-17` of the accumulated value, for both tails.
pub fn ln_ncx2(dof: f64, lambda: f64, x: f64) -> Result<LnTails> {
    if !(dof > 0.0) || !(lambda >= 0.0) || x.is_nan() {
        bail!(Domain, "noncentral chi-square needs dof > 0, lambda >= 0 (dof={dof}, lambda={lambda})");
    }
    if x <= 0.0 {
        return Ok(LnTails { lower: f64::NEG_INFINITY, upper: 0.0 });
    }
    let half_dof = 0.5 * dof;
    let y = 0.5 * x;
    if lambda == 0.0 {
        return ln_incgamma(half_dof, y);
    }
    let mu = 0.5 * lambda;
    let ln_mu = libm::log(mu);
    let mut lower = LogSum::new();
    let mut upper = LogSum::new();
    for j in 0..NCX2_MAX_TERMS {
        let jf = j as f64;
        let ln_weight = -mu + jf * ln_mu - ln_gamma(jf + 1.0);
        let g = ln_incgamma(half_dof + jf, y)?;
        let term_lower = ln_weight + g.lower;
        lower.add(term_lower);
        upper.add(ln_weight + g.upper);
        if jf + 1.0 > mu {
            let r = mu / (jf + 1.0);
            let ln_factor = libm::log(r) - libm::log1p(-r);
            let lower_done = lower.ln() == f64::NEG_INFINITY && term_lower == f64::NEG_INFINITY
                || term_lower + ln_factor < lower.ln() - 39.0;
            let upper_done = ln_weight + ln_factor < upper.ln() - 39.0;
            if lower_done && upper_done {
                // the smaller tail is accurate in relative terms; derive the other from it
                let (lo, up) = (lower.ln(), upper.ln());
                return Ok(if lo < up { LnTails::from_lower(lo) } else { LnTails::from_upper(up) });
            }
        }
    }
    bail!(Numerical, "noncentral chi-square series exceeded {NCX2_MAX_TERMS} terms (dof={dof}, lambda={lambda}, x={x})")
}

/// Probability that the first coordinate of a uniform unit vector in
/// `R^dim` is at least `t` (a spherical cap), with its complement, in logs.
///
/// For `dim ≥ 2` and `t ≥ 0` the cap is `½ I_{1-t²}((dim-1)/2, ½)`; negative
/// `t` uses the mirror cap. In one dimension the coordinate is `±1`.
pub fn ln_cap(dim: usize, t: f64) -> Result<LnTails> {
    if dim == 0 {
        bail!(Domain, "spherical cap needs dim >= 1");
    }
    if t.is_nan() {
        bail!(Domain, "spherical cap threshold is NaN");
    }
    let ln_half = -core::f64::consts::LN_2;
    if dim == 1 {
        return Ok(if t <= -1.0 {
            LnTails { lower: 0.0, upper: f64::NEG_INFINITY }
        } else if t <= 1.0 {
            LnTails { lower: ln_half, upper: ln_half }
        } else {
            LnTails { lower: f64::NEG_INFINITY, upper: 0.0 }
        });
    }
    if t >= 1.0 {
        return Ok(LnTails { lower: f64::NEG_INFINITY, upper: 0.0 });
    }
    if t <= -1.0 {
        return Ok(LnTails { lower: 0.0, upper: f64::NEG_INFINITY });
    }
    let beta = ln_incbeta_pair(0.5 * (dim as f64 - 1.0), 0.5, (1.0 - t) * (1.0 + t), t * t)?;
    let small = ln_half + beta.lower;
    let tails = LnTails::from_lower(small);
    Ok(if t >= 0.0 { tails } else { tails.swap() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn qfunc_values() {
        assert_eq!(qfunc(0.0), 0.5);
        // erfc series oracle: Q(x) = 1/2 - (1/sqrt(2π)) Σ (-1)^n x^{2n+1} / (2^n n! (2n+1))
        let series = |x: f64| {
            let mut sum = 0.0;
            let mut term = x;
            for n in 0..80 {
                sum += term / (2 * n + 1) as f64;
                term *= -x * x / (2.0 * (n + 1) as f64);
            }
            0.5 - sum / (2.0 * core::f64::consts::PI).sqrt()
        };
        for &x in &[0.3, 1.0, 1.28155, 2.5, -1.7] {
            assert!((qfunc(x) - series(x)).abs() < 1e-13, "x={x}");
        }
        assert!((qfunc(1.28155) - 0.1).abs() < 1e-5);
    }

    #[test]
    fn qfunc_inverse_round_trip() {
        let x = qfunc_inv(qfunc(1.2345)).unwrap();
        assert!((x - 1.2345).abs() < 1e-8);
        assert_eq!(qfunc_inv(0.5).unwrap().abs() < 1e-15, true);
        for &p in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.7, 0.99, 1.0 - 1e-9] {
            let z = qfunc_inv(p).unwrap();
            assert!((qfunc(z) - p).abs() <= 1e-10 * p.max(1e-3), "p={p}");
        }
        assert!(qfunc_inv(0.0).is_err());
        assert!(qfunc_inv(1.0).is_err());
        assert!(qfunc_inv(f64::NAN).is_err());
    }

    #[test]
    fn incbeta_against_quadrature() {
        for &(a, b, x) in &[(2.0, 3.0, 0.4), (7.5, 0.5, 0.3), (0.5, 0.5, 0.25), (15.5, 0.5, 0.9)] {
            let ln_b = ln_beta(a, b);
            // substitute t = x u^(4/a) to smooth the endpoint behaviour
            let f = |u: f64| {
                let t = x * u.powf(4.0 / a);
                (1.0 - t).powf(b - 1.0) * x.powf(a) * 4.0 / a * u * u * u
            };
            let exact = simpson(f, 0.0, 1.0, 20_000) / ln_b.exp();
            let got = ln_incbeta(a, b, x).unwrap();
            assert!((got.lower.exp() - exact).abs() < 1e-8, "a={a} b={b} x={x} got={} exact={exact}", got.lower.exp());
            assert!((got.lower.exp() + got.upper.exp() - 1.0).abs() < 1e-14);
        }
        // I_{1/4}(1/2, 1/2) = (2/π) asin(1/2) = 1/3
        let v = ln_incbeta(0.5, 0.5, 0.25).unwrap().lower.exp();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn incgamma_known_values() {
        // P(1, x) = 1 - e^{-x}
        for &x in &[0.1, 1.0, 5.0, 30.0] {
            let g = ln_incgamma(1.0, x).unwrap();
            assert!((g.lower.exp() - (1.0 - (-x as f64).exp())).abs() < 1e-14);
            assert!((g.upper - (-x)).abs() < 1e-12);
        }
        // tiny lower tail stays accurate in relative terms: P(a, x) ~ x^a e^{-x} / Γ(a+1)
        let g = ln_incgamma(200.0, 1.0).unwrap();
        let lead = 200.0 * 0.0 - 1.0 - ln_gamma(201.0);
        assert!((g.lower - lead - (1.0f64 + 1.0 / 201.0 + 1.0 / (201.0 * 202.0)).ln()).abs() < 1e-6);
    }

    #[test]
    fn ncx2_matches_gaussian_integral_in_one_dimension() {
        // P((Z + m)^2 <= x) for Z standard normal
        let m: f64 = 1.3;
        let x: f64 = 0.8;
        let truth = qfunc(-x.sqrt() - m) - qfunc(x.sqrt() - m);
        let got = ln_ncx2(1.0, m * m, x).unwrap();
        assert!((got.lower.exp() - truth).abs() < 1e-13);
        assert!((got.upper.exp() - (1.0 - truth)).abs() < 1e-13);
    }

    #[test]
    fn ncx2_large_noncentrality_is_finite_in_logs() {
        let t = ln_ncx2(512.0, 682.67, 170.67).unwrap();
        assert!(t.lower.is_finite() && t.lower < -300.0, "{t:?}");
        assert!(t.upper.abs() < 1e-100, "{t:?}");
    }

    #[test]
    fn cap_special_cases() {
        // half sphere
        for dim in 2..10 {
            let c = ln_cap(dim, 0.0).unwrap();
            assert!((c.lower.exp() - 0.5).abs() < 1e-14);
        }
        // circle: P(cos θ >= t) = acos(t)/π
        for &t in &[-0.9, -0.3, 0.2, 0.8660254037844386] {
            let c = ln_cap(2, t).unwrap();
            assert!((c.lower.exp() - libm::acos(t) / core::f64::consts::PI).abs() < 1e-13);
        }
        // 3-sphere surface: first coordinate uniform on [-1, 1]
        for &t in &[-0.5, 0.1, 0.7] {
            let c = ln_cap(3, t).unwrap();
            assert!((c.lower.exp() - (1.0 - t) / 2.0).abs() < 1e-13);
        }
        assert_eq!(ln_cap(1, 0.3).unwrap().lower, -core::f64::consts::LN_2);
        assert_eq!(ln_cap(5, 1.0).unwrap().lower, f64::NEG_INFINITY);
    }
}
