//! Scalar laws of codeword matching metrics and exact order-statistic
//! sampling from them.
//!
//! Codewords in one subcodebook are i.i.d. and independent of everything
//! else, so the distance from a fixed vector to each codeword is an i.i.d.
//! scalar whose law depends only on that vector's norm. The best of `M`
//! codewords can then be drawn by inverting `1 − (1 − F)^M` instead of
//! materialising `M` vectors.

use rand::Rng;

use crate::error::{bail, Result};
use crate::special::{ln_cap, ln_ncx2, ln_one_minus_exp, LnTails};
use crate::CodebookKind;

const BISECTION_STEPS: usize = 200;

/// Law of `‖v − C‖²` for a fixed vector `v` and a random codeword `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum MetricLaw {
    /// `a − b·U₁` with `U` uniform on the unit sphere of `R^dim`.
    Sphere { dim: usize, a: f64, b: f64 },
    /// `scale · W` with `W ~ χ'²_dof(λ)`.
    Ncx2 { dof: f64, lambda: f64, scale: f64 },
}

impl MetricLaw {
    /// Distance law from `v` (with `‖v‖² = v_norm_sq`) to a codeword of
    /// `kind` in dimension `dim` with per-symbol power `power`.
    pub(crate) fn new(kind: CodebookKind, dim: usize, v_norm_sq: f64, power: f64) -> Self {
        match kind {
            CodebookKind::Spherical => {
                let r2 = dim as f64 * power;
                MetricLaw::Sphere { dim, a: v_norm_sq + r2, b: 2.0 * libm::sqrt(v_norm_sq * r2) }
            }
            CodebookKind::Iid => MetricLaw::Ncx2 { dof: dim as f64, lambda: v_norm_sq / power, scale: power },
        }
    }

    /// `ln P(metric ≤ x)` in `lower`, `ln P(metric > x)` in `upper`.
    pub(crate) fn ln_cdf(&self, x: f64) -> Result<LnTails> {
        match *self {
            MetricLaw::Sphere { dim, a, b } => {
                if b <= 0.0 {
                    return Ok(if x >= a {
                        LnTails { lower: 0.0, upper: f64::NEG_INFINITY }
                    } else {
                        LnTails { lower: f64::NEG_INFINITY, upper: 0.0 }
                    });
                }
                // metric ≤ x  ⇔  U₁ ≥ (a − x)/b
                let cap = ln_cap(dim, (a - x) / b)?;
                Ok(LnTails { lower: cap.lower, upper: cap.upper })
            }
            MetricLaw::Ncx2 { dof, lambda, scale } => ln_ncx2(dof, lambda, x / scale),
        }
    }

    /// A bracket `[lo, hi]` holding all but a negligible part of the mass.
    fn bracket(&self) -> (f64, f64) {
        match *self {
            MetricLaw::Sphere { a, b, .. } => (a - b, a + b),
            MetricLaw::Ncx2 { dof, lambda, scale } => {
                let mean = dof + lambda;
                let sd = libm::sqrt(2.0 * (dof + 2.0 * lambda));
                (0.0, scale * (mean + 40.0 * sd + 100.0))
            }
        }
    }
}

/// A tail probability to match, in logs.
#[derive(Clone, Copy, Debug)]
enum Target {
    /// Solve `ln P(metric ≤ x) = value`.
    Lower(f64),
    /// Solve `ln P(metric > x) = value`.
    Upper(f64),
}

fn quantile(law: &MetricLaw, target: Target) -> Result<f64> {
    let (mut lo, mut hi) = law.bracket();
    let below = |t: &LnTails| match target {
        Target::Lower(v) => t.lower < v,
        Target::Upper(v) => t.upper > v,
    };
    // widen the bracket for unbounded laws
    let mut widen = 0;
    while below(&law.ln_cdf(hi)?) {
        if matches!(law, MetricLaw::Sphere { .. }) || widen > 64 {
            return Ok(hi);
        }
        lo = hi;
        hi *= 2.0;
        widen += 1;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(&law.ln_cdf(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    if !x.is_finite() {
        bail!(Numerical, "metric quantile did not converge ({law:?})");
    }
    Ok(x)
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1): 53 random bits offset by half an ulp
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One draw of the metric.
pub(crate) fn draw<R: Rng + ?Sized>(law: &MetricLaw, rng: &mut R) -> Result<f64> {
    let v = uniform_open(rng);
    let target = if v < 0.5 { Target::Lower(libm::log(v)) } else { Target::Upper(libm::log1p(-v)) };
    quantile(law, target)
}

/// One draw of the metric conditioned on exceeding `floor`.
pub(crate) fn draw_above<R: Rng + ?Sized>(law: &MetricLaw, floor: f64, rng: &mut R) -> Result<f64> {
    let ln_tail = law.ln_cdf(floor)?.upper;
    let v = uniform_open(rng);
    if ln_tail == f64::NEG_INFINITY {
        return Ok(floor);
    }
    let x = quantile(law, Target::Upper(ln_tail + libm::log1p(-v)))?;
    Ok(x.max(floor))
}

/// The minimum of `count` i.i.d. draws of the metric (`+∞` when empty).
pub(crate) fn draw_min<R: Rng + ?Sized>(law: &MetricLaw, count: u128, rng: &mut R) -> Result<f64> {
    let u = uniform_open(rng);
    if count == 0 {
        return Ok(f64::INFINITY);
    }
    // P(min > x) = (1 − F(x))^count = 1 − u
    let ln_survival = libm::log1p(-u) / count as f64;
    let ln_f = ln_one_minus_exp(ln_survival);
    let target = if ln_f < -core::f64::consts::LN_2 { Target::Lower(ln_f) } else { Target::Upper(ln_survival) };
    quantile(law, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use alloc::vec::Vec;

    fn empirical_cdf(samples: &[f64], x: f64) -> f64 {
        samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64
    }

    #[test]
    fn quantile_inverts_the_cdf() {
        let laws = [
            MetricLaw::Sphere { dim: 7, a: 5.0, b: 3.0 },
            MetricLaw::Ncx2 { dof: 6.0, lambda: 4.0, scale: 0.5 },
        ];
        for law in laws {
            for p in [1e-12, 1e-5, 0.1, 0.5, 0.9] {
                let x = quantile(&law, Target::Lower(libm::log(p))).unwrap();
                let got = libm::exp(law.ln_cdf(x).unwrap().lower);
                assert!((got / p - 1.0).abs() < 1e-8, "{law:?} p={p} got={got}");
            }
        }
    }

    #[test]
    fn minimum_matches_direct_sampling() {
        let law = MetricLaw::new(CodebookKind::Spherical, 5, 4.0, 1.0);
        let mut rng = stream(3, Domain::Auxiliary, 0);
        let m = 6u128;
        let via_order: Vec<f64> = (0..20_000).map(|_| draw_min(&law, m, &mut rng).unwrap()).collect();
        let direct: Vec<f64> = (0..20_000)
            .map(|_| (0..m).map(|_| draw(&law, &mut rng).unwrap()).fold(f64::INFINITY, f64::min))
            .collect();
        for x in [4.0, 5.0, 6.0, 7.0] {
            let (a, b) = (empirical_cdf(&via_order, x), empirical_cdf(&direct, x));
            assert!((a - b).abs() < 0.02, "x={x}: {a} vs {b}");
            let exact = 1.0 - libm::pow(1.0 - libm::exp(law.ln_cdf(x).unwrap().lower), m as f64);
            assert!((a - exact).abs() < 0.015, "x={x}: {a} vs exact {exact}");
        }
    }

    #[test]
    fn conditional_draws_stay_above_floor() {
        let law = MetricLaw::new(CodebookKind::Iid, 4, 3.0, 0.5);
        let mut rng = stream(4, Domain::Auxiliary, 0);
        let floor = 2.0;
        let ln_tail = law.ln_cdf(floor).unwrap().upper;
        let xs: Vec<f64> = (0..20_000).map(|_| draw_above(&law, floor, &mut rng).unwrap()).collect();
        assert!(xs.iter().all(|&x| x >= floor));
        let x = 4.0;
        let exact = 1.0 - libm::exp(law.ln_cdf(x).unwrap().upper - ln_tail);
        assert!((empirical_cdf(&xs, x) - exact).abs() < 0.015);
    }

    #[test]
    fn huge_counts_reach_deep_tails() {
        let law = MetricLaw::new(CodebookKind::Spherical, 32, 40.0, 3.0);
        let mut rng = stream(5, Domain::Auxiliary, 0);
        let m = 1u128 << 100;
        let x = draw_min(&law, m, &mut rng).unwrap();
        let ln_f = law.ln_cdf(x).unwrap().lower;
        // the minimum of 2^100 draws sits near the 2^-100 quantile
        assert!(ln_f < -50.0 && ln_f > -90.0, "ln F = {ln_f}");
    }
}
