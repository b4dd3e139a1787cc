//! Non-excess-distortion probabilities.
//!
//! `Ψ_†(k, p)` is the probability that one random codeword of kind `†`
//! reproduces a fixed source sequence of power `p` within distortion `D`.
//! Both kinds are computed exactly: the spherical one is a spherical cap,
//! the i.i.d. one a noncentral chi-square CDF. The bounds `ĝ ≤ Ψ_sp ≤ ḡ`
//! and the exponent functions `R_sp`, `R_iid` are provided alongside.

use crate::error::{bail, Result};
use crate::special::{ln_cap, ln_gamma, ln_ncx2};
use crate::CodebookKind;

/// Source power and distortion level together with the radii
/// `r₁² = (√(σ²−D) − √D)²` and `r₂² = (√(σ²−D) + √D)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiContext {
    pub sigma2: f64,
    pub distortion: f64,
    pub r1sq: f64,
    pub r2sq: f64,
}

impl PsiContext {
    pub fn new(sigma2: f64, distortion: f64) -> Result<Self> {
        if !(distortion > 0.0 && distortion < sigma2 && sigma2.is_finite()) {
            bail!(Config, "need 0 < D < σ² (σ²={sigma2}, D={distortion})");
        }
        let a = libm::sqrt(sigma2 - distortion);
        let b = libm::sqrt(distortion);
        Ok(PsiContext { sigma2, distortion, r1sq: (a - b) * (a - b), r2sq: (a + b) * (a + b) })
    }

    /// Codeword power `σ² − D`.
    pub fn codeword_power(&self) -> f64 {
        self.sigma2 - self.distortion
    }

    /// Whether `p` lies strictly inside `(r₁², r₂²)`.
    pub fn in_support(&self, p: f64) -> bool {
        p > self.r1sq && p < self.r2sq
    }

    /// Cosine threshold `t` such that a spherical codeword is within
    /// distortion `D` of a power-`p` sequence iff their cosine is `≥ t`.
    pub fn cap_cosine(&self, p: f64) -> f64 {
        (p + self.sigma2 - 2.0 * self.distortion) / (2.0 * libm::sqrt(p * self.codeword_power()))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        bail!(Domain, "block length k must be at least 1");
    }
    Ok(())
}

/// `ln Ψ_sp(k, p)`; `−∞` outside the open interval `(r₁², r₂²)`.
pub fn ln_psi_sp(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    check_k(k)?;
    if !(p > 0.0) {
        bail!(Domain, "Ψ_sp needs p > 0, got {p}");
    }
    if !ctx.in_support(p) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ln_cap(k, ctx.cap_cosine(p))?.lower)
}

/// Exact `Ψ_sp(k, p)`.
pub fn psi_sp(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    Ok(libm::exp(ln_psi_sp(k, p, ctx)?))
}

/// `ln Ψ_iid(k, p)` via the noncentral chi-square law of `‖s − Ŝ‖² / (σ²−D)`.
pub fn ln_psi_iid(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    check_k(k)?;
    if !(p >= 0.0) {
        bail!(Domain, "Ψ_iid needs p >= 0, got {p}");
    }
    let v = ctx.codeword_power();
    let kf = k as f64;
    Ok(ln_ncx2(kf, kf * p / v, kf * ctx.distortion / v)?.lower)
}

/// Exact `Ψ_iid(k, p)`.
pub fn psi_iid(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    Ok(libm::exp(ln_psi_iid(k, p, ctx)?))
}

/// `ln Ψ_†(k, p)` for either codebook kind.
pub fn ln_psi(kind: CodebookKind, k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    match kind {
        CodebookKind::Spherical => ln_psi_sp(k, p, ctx),
        CodebookKind::Iid => ln_psi_iid(k, p, ctx),
    }
}

/// Spherical exponent `R_sp(p) = −½ ln(1 − t²)` with `t` the cap cosine.
pub fn r_sp(p: f64, ctx: &PsiContext) -> Result<f64> {
    if !ctx.in_support(p) {
        bail!(Domain, "R_sp needs p in (r₁², r₂²) = ({}, {}), got {p}", ctx.r1sq, ctx.r2sq);
    }
    let t = ctx.cap_cosine(p);
    let arg = (1.0 - t) * (1.0 + t);
    if !(arg > 0.0) {
        bail!(Domain, "R_sp log argument {arg} is not positive at p={p}");
    }
    Ok(-0.5 * libm::log(arg))
}

/// Optimal tilt `s*(p)` of the i.i.d. exponent.
pub fn s_star(p: f64, ctx: &PsiContext) -> Result<f64> {
    if !(p >= 0.0) {
        bail!(Domain, "s* needs p >= 0, got {p}");
    }
    let (s2, d) = (ctx.sigma2, ctx.distortion);
    let v = s2 - d;
    Ok(((s2 - 3.0 * d + libm::sqrt(v * v + 4.0 * p * d)) / (4.0 * d)).max(0.0))
}

/// The i.i.d. exponent evaluated at tilt `s`.
pub fn iid_exponent(s: f64, p: f64, ctx: &PsiContext) -> f64 {
    let v = ctx.codeword_power();
    let u = 1.0 + 2.0 * s;
    0.5 * libm::log(u) + s * p / (u * v) - s * ctx.distortion / v
}

/// `R_iid(p)`, the i.i.d. exponent at `s*(p)`.
pub fn r_iid(p: f64, ctx: &PsiContext) -> Result<f64> {
    let s = s_star(p, ctx)?;
    Ok(iid_exponent(s, p, ctx))
}

/// `κ(s, p) = ((σ²−D)(1+2s) + 2p)² / ((σ²−D)(1+2s)³)`.
pub fn kappa(s: f64, p: f64, ctx: &PsiContext) -> Result<f64> {
    if !(s >= 0.0 && p >= 0.0) {
        bail!(Domain, "κ needs s >= 0 and p >= 0 (s={s}, p={p})");
    }
    let v = ctx.codeword_power();
    let u = 1.0 + 2.0 * s;
    let num = v * u + 2.0 * p;
    Ok(num * num / (v * u * u * u))
}

/// `ln ĝ(k, p)`, the lower bound on `Ψ_sp`.
pub fn ln_psi_sp_lower(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    check_k(k)?;
    let r = r_sp(p, ctx)?;
    let kf = k as f64;
    let ln_front = ln_gamma(0.5 * (kf + 2.0))
        - 0.5 * libm::log(core::f64::consts::PI)
        - libm::log(kf)
        - ln_gamma(0.5 * (kf + 1.0));
    Ok(ln_front - (kf - 1.0) * r)
}

/// `ĝ(k, p)`.
pub fn psi_sp_lower(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    Ok(libm::exp(ln_psi_sp_lower(k, p, ctx)?))
}

/// `ln ḡ(k, p)`, the upper bound on `Ψ_sp`; needs `p + σ² − 2D ≥ 0`, `k ≥ 2`.
pub fn ln_psi_sp_upper(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    if k < 2 {
        bail!(Domain, "ḡ needs k >= 2, got {k}");
    }
    if p + ctx.sigma2 - 2.0 * ctx.distortion < 0.0 {
        bail!(Domain, "ḡ needs p + σ² − 2D >= 0, got p={p}");
    }
    let r = r_sp(p, ctx)?;
    let kf = k as f64;
    let ln_front = ln_gamma(0.5 * kf) - ln_gamma(0.5 * (kf - 1.0)) - 0.5 * libm::log(core::f64::consts::PI);
    Ok(ln_front - (kf - 3.0) * r)
}

/// `ḡ(k, p)`.
pub fn psi_sp_upper(k: usize, p: f64, ctx: &PsiContext) -> Result<f64> {
    Ok(libm::exp(ln_psi_sp_upper(k, p, ctx)?))
}
