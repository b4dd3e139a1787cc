//! Closed-form quantities: capacity, rate-distortion, the mismatched
//! dispersions and the asymptotic predictions built from them.
//!
//! All logarithms are natural; rates are in nats. Predictions are pure
//! normal approximations: the `O(log n)` corrections are not modelled.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::CodebookKind;

pub use crate::special::{qfunc, qfunc_inv};

/// Relative tolerance for the agreement of the two joint-dispersion forms.
pub const JOINT_FORM_TOLERANCE: f64 = 1e-12;

/// Gaussian capacity `½ ln(1 + P)`.
pub fn capacity(power: f64) -> Result<f64> {
    if !(power >= 0.0) {
        bail!(Domain, "capacity needs P >= 0, got {power}");
    }
    Ok(0.5 * libm::log1p(power))
}

/// Gaussian rate-distortion function `max{½ ln(σ²/D), 0}`.
pub fn rate_distortion(sigma2: f64, distortion: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && distortion > 0.0) {
        bail!(Domain, "rate_distortion needs σ² > 0 and D > 0 (σ²={sigma2}, D={distortion})");
    }
    Ok((0.5 * libm::log(sigma2 / distortion)).max(0.0))
}

/// Optimal bandwidth expansion ratio `ρ* = C(P) / R(σ², D)`.
pub fn bandwidth_ratio(power: f64, sigma2: f64, distortion: f64) -> Result<f64> {
    let r = rate_distortion(sigma2, distortion)?;
    if r == 0.0 {
        bail!(Domain, "bandwidth ratio undefined: R(σ²={sigma2}, D={distortion}) = 0");
    }
    Ok(capacity(power)? / r)
}

/// Source dispersion `(ζ_s − σ⁴) / (4σ⁴)`.
pub fn v_source(zeta_s: f64, sigma2: f64) -> Result<f64> {
    let s4 = sigma2 * sigma2;
    if !(sigma2 > 0.0) || !(zeta_s >= s4 * (1.0 - 1e-12)) {
        bail!(Domain, "v_source needs σ² > 0 and ζ_s >= σ⁴ (ζ_s={zeta_s}, σ²={sigma2})");
    }
    Ok(((zeta_s - s4) / (4.0 * s4)).max(0.0))
}

/// Channel dispersion of nearest-neighbour decoding with a spherical or
/// i.i.d. Gaussian codebook.
pub fn v_channel(zeta_c: f64, power: f64, kind: CodebookKind) -> Result<f64> {
    if !(power > 0.0) || !(zeta_c >= 1.0 - 1e-12) {
        bail!(Domain, "v_channel needs P > 0 and ζ_c >= 1 (ζ_c={zeta_c}, P={power})");
    }
    let shift = match kind {
        CodebookKind::Spherical => -1.0,
        CodebookKind::Iid => 1.0,
    };
    let p1 = power + 1.0;
    Ok((power * power * (zeta_c + shift) + 4.0 * power) / (4.0 * p1 * p1))
}

/// Joint dispersion computed both as `(ρ* V_s + V_c) / R²` and as
/// `(C V_s + R V_c) / R³`; returns the first after checking agreement.
pub fn v_joint(
    zeta_s: f64,
    sigma2: f64,
    zeta_c: f64,
    power: f64,
    distortion: f64,
    kind: CodebookKind,
) -> Result<f64> {
    if !(distortion > 0.0 && distortion < sigma2) {
        bail!(Domain, "v_joint needs D in (0, σ²) (D={distortion}, σ²={sigma2})");
    }
    let vs = v_source(zeta_s, sigma2)?;
    let vc = v_channel(zeta_c, power, kind)?;
    let c = capacity(power)?;
    let r = rate_distortion(sigma2, distortion)?;
    let rho = c / r;
    let ratio_form = (rho * vs + vc) / (r * r);
    let cubic_form = (c * vs + r * vc) / (r * r * r);
    let scale = ratio_form.abs().max(cubic_form.abs());
    if scale > 0.0 && libm::fabs(ratio_form - cubic_form) > JOINT_FORM_TOLERANCE * scale {
        bail!(
            Numerical,
            "joint dispersion forms disagree: {ratio_form} vs {cubic_form} (relative {})",
            libm::fabs(ratio_form - cubic_form) / scale
        );
    }
    Ok(ratio_form)
}

/// Every first- and second-order constant of one operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub power: f64,
    pub sigma2: f64,
    pub distortion: f64,
    pub zeta_s: f64,
    pub zeta_c: f64,
    /// `C(P)`, nats per channel use.
    pub capacity: f64,
    /// `R(σ², D)`, nats per source symbol.
    pub rate_distortion: f64,
    pub rho_star: f64,
    pub v_s: f64,
    pub v_c_sp: f64,
    pub v_c_iid: f64,
    pub v_joint_sp: f64,
    pub v_joint_iid: f64,
    /// `1 / (2 V_sp)`; infinite when the joint dispersion vanishes.
    pub nu_star_sp: f64,
    /// `1 / (2 V_iid)`.
    pub nu_star_iid: f64,
}

impl DispersionReport {
    pub fn new(power: f64, sigma2: f64, distortion: f64, zeta_s: f64, zeta_c: f64) -> Result<Self> {
        let capacity = capacity(power)?;
        let rate_distortion = rate_distortion(sigma2, distortion)?;
        let rho_star = bandwidth_ratio(power, sigma2, distortion)?;
        let v_joint_sp = v_joint(zeta_s, sigma2, zeta_c, power, distortion, CodebookKind::Spherical)?;
        let v_joint_iid = v_joint(zeta_s, sigma2, zeta_c, power, distortion, CodebookKind::Iid)?;
        Ok(DispersionReport {
            power,
            sigma2,
            distortion,
            zeta_s,
            zeta_c,
            capacity,
            rate_distortion,
            rho_star,
            v_s: v_source(zeta_s, sigma2)?,
            v_c_sp: v_channel(zeta_c, power, CodebookKind::Spherical)?,
            v_c_iid: v_channel(zeta_c, power, CodebookKind::Iid)?,
            v_joint_sp,
            v_joint_iid,
            nu_star_sp: 1.0 / (2.0 * v_joint_sp),
            nu_star_iid: 1.0 / (2.0 * v_joint_iid),
        })
    }

    /// Channel dispersion for the channel codebook `kind`.
    pub fn v_c(&self, kind: CodebookKind) -> f64 {
        match kind {
            CodebookKind::Spherical => self.v_c_sp,
            CodebookKind::Iid => self.v_c_iid,
        }
    }

    /// Joint dispersion for the channel codebook `kind`.
    pub fn v_joint(&self, kind: CodebookKind) -> f64 {
        match kind {
            CodebookKind::Spherical => self.v_joint_sp,
            CodebookKind::Iid => self.v_joint_iid,
        }
    }

    /// `k*(n, ε)` predicted by the normal approximation.
    pub fn k_star(&self, n: usize, eps: f64, kind: CodebookKind) -> Result<f64> {
        second_order_k(n, eps, self, kind)
    }

    /// Normal-approximation excess-distortion probability at `(k, n)`,
    /// `Q((nρ* − k) / √(n V))`, the inverse of [`second_order_k`]. Equal to
    /// `Q((nC − kR) / (R √(n V)))`.
    pub fn predicted_eps(&self, k: usize, n: usize, kind: CodebookKind) -> f64 {
        let n_f = n as f64;
        let margin = n_f * self.rho_star - k as f64;
        let spread = libm::sqrt(n_f * self.v_joint(kind));
        if spread == 0.0 {
            return if margin > 0.0 {
                0.0
            } else if margin < 0.0 {
                1.0
            } else {
                0.5
            };
        }
        qfunc(margin / spread)
    }
}

/// Normal approximation of the largest admissible source length,
/// `n ρ* − √(n V) Q⁻¹(ε)`, unrounded.
pub fn second_order_k(n: usize, eps: f64, report: &DispersionReport, kind: CodebookKind) -> Result<f64> {
    if n == 0 {
        bail!(Domain, "second_order_k needs n >= 1");
    }
    let q = qfunc_inv(eps)?;
    let n = n as f64;
    Ok(n * report.rho_star - libm::sqrt(n * report.v_joint(kind)) * q)
}

/// Moderate-deviations constant `ν* = 1 / (2 V)`.
pub fn md_constant(report: &DispersionReport, kind: CodebookKind) -> Result<f64> {
    let v = report.v_joint(kind);
    if !(v > 0.0) {
        bail!(Domain, "moderate-deviations constant needs a positive joint dispersion");
    }
    Ok(1.0 / (2.0 * v))
}

/// Golden-section tolerance on the split `ε₁`.
pub const SPLIT_TOLERANCE: f64 = 1e-8;

/// Second-order backoff of separate source and channel coding,
/// `min_{ε₁+ε₂=ε} √(ρ* V_s)/R · Q⁻¹(ε₁) + √V_c/R · Q⁻¹(ε₂)`.
///
/// Each term is convex in its own argument on `(0, ½)`, so the objective is
/// unimodal in `ε₁` and golden-section search applies.
pub fn separate_second_order(eps: f64, report: &DispersionReport, kind: CodebookKind) -> Result<f64> {
    Ok(separate_second_order_split(eps, report, kind)?.0)
}

/// As [`separate_second_order`], also returning the minimising `ε₁`.
pub fn separate_second_order_split(eps: f64, report: &DispersionReport, kind: CodebookKind) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < 0.5) {
        bail!(Domain, "separate_second_order needs ε in (0, 0.5), got {eps}");
    }
    let r = report.rate_distortion;
    let a = libm::sqrt(report.rho_star * report.v_s) / r;
    let b = libm::sqrt(report.v_c(kind)) / r;
    if a == 0.0 {
        return Ok((b * qfunc_inv(eps)?, 0.0));
    }
    if b == 0.0 {
        return Ok((a * qfunc_inv(eps)?, eps));
    }
    let objective = |e1: f64| -> Result<f64> { Ok(a * qfunc_inv(e1)? + b * qfunc_inv(eps - e1)?) };

    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (0.0, eps);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    let mut iterations = 0;
    while hi - lo > SPLIT_TOLERANCE {
        iterations += 1;
        if iterations > 500 {
            bail!(Numerical, "golden-section search stalled on [{lo}, {hi}] for ε={eps}, a={a}, b={b}");
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    let e1 = 0.5 * (lo + hi);
    let value = objective(e1)?;
    if !value.is_finite() {
        bail!(Numerical, "separate-coding objective is not finite at ε₁={e1}");
    }
    Ok((value, e1))
}

/// Moderate-deviations constant of separate coding,
/// `min{R² / (2 ρ* V_s), R² / (2 V_c)}`.
pub fn separate_md(report: &DispersionReport, kind: CodebookKind) -> Result<f64> {
    let r2 = report.rate_distortion * report.rate_distortion;
    let source = report.rho_star * report.v_s;
    let channel = report.v_c(kind);
    if source == 0.0 && channel == 0.0 {
        bail!(Domain, "separate moderate-deviations constant needs a positive dispersion");
    }
    let branch = |v: f64| if v > 0.0 { r2 / (2.0 * v) } else { f64::INFINITY };
    Ok(branch(source).min(branch(channel)))
}
