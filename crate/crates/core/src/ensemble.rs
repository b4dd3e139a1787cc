//! Power-type partition, subcodebook sizing and random codebooks.

use alloc::vec::Vec;

use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::SystemConfig;
use crate::nonexcess::{ln_psi, PsiContext};
use crate::CodebookKind;

/// Default hard cap on the number of stored codewords `Σ M_i`.
pub const DEFAULT_CODEWORD_CAP: u128 = 10_000_000;

/// Quantisation range `ξ = √(ln k / k)` for second-order operation.
pub fn xi_second_order(k: usize) -> Result<f64> {
    if k < 2 {
        bail!(Domain, "second-order quantisation range needs k >= 2, got {k}");
    }
    let kf = k as f64;
    Ok(libm::sqrt(libm::log(kf) / kf))
}

/// Quantisation range `ξ = η^{3/4}` for moderate-deviations operation.
pub fn xi_moderate(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        bail!(Domain, "moderate-deviations backoff η must lie in (0, 1], got {eta}");
    }
    Ok(libm::pow(eta, 0.75))
}

/// Result of sorting a source sequence into a power type class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Type class `T_i`, 1-based.
    Type(usize),
    /// Power outside `[Υ(0), Υ(N))`.
    Atypical,
}

/// Quantisation of the empirical power `‖s‖²/k` into `N = ⌈2kξ⌉` cells
/// `[Υ(i−1), Υ(i))` of width `σ²/k`, starting at `Υ(0) = (1−ξ)σ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypePartition {
    xi: f64,
    k: usize,
    sigma2: f64,
    levels: Vec<f64>,
}

/// Builds the partition for source length `k` and range `ξ ∈ (0, 1)`.
pub fn build_partition(k: usize, xi: f64, sigma2: f64) -> Result<TypePartition> {
    if k == 0 {
        bail!(Config, "source length k must be at least 1");
    }
    if !(xi > 0.0 && xi < 1.0) {
        bail!(Config, "quantisation range ξ must lie in (0, 1), got {xi} (Υ(0) would not be positive)");
    }
    if !(sigma2 > 0.0) {
        bail!(Config, "σ² must be positive");
    }
    let kf = k as f64;
    let count = libm::ceil(2.0 * kf * xi) as usize;
    let levels = (0..=count)
        .map(|i| if i == 0 { (1.0 - xi) * sigma2 } else { (1.0 - xi + i as f64 / kf) * sigma2 })
        .collect();
    Ok(TypePartition { xi, k, sigma2, levels })
}

impl TypePartition {
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    /// Number of type classes `N`.
    pub fn num_types(&self) -> usize {
        self.levels.len() - 1
    }
    /// `Υ(0), …, Υ(N)`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
    /// `Υ(i)`.
    pub fn level(&self, i: usize) -> f64 {
        self.levels[i]
    }

    /// Cell containing empirical power `power`.
    pub fn classify_power(&self, power: f64) -> Classification {
        let n = self.num_types();
        if !(power >= self.levels[0] && power < self.levels[n]) {
            return Classification::Atypical;
        }
        // number of levels ≤ power equals the 1-based cell index
        Classification::Type(self.levels.partition_point(|&l| l <= power))
    }

    /// Type class of a length-`k` source sequence.
    pub fn classify(&self, s: &[f64]) -> Classification {
        debug_assert_eq!(s.len(), self.k);
        let power = s.iter().map(|x| x * x).sum::<f64>() / self.k as f64;
        self.classify_power(power)
    }
}

/// Subcodebook sizes `M_1, …, M_N`. A size of zero marks a cell dropped by
/// truncation; its sequences count as encoder failures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcodebookSizes {
    pub m: Vec<u128>,
    pub ln_m: Vec<f64>,
}

impl SubcodebookSizes {
    pub fn from_counts(m: Vec<u128>) -> Self {
        let ln_m = m.iter().map(|&x| if x == 0 { f64::NEG_INFINITY } else { libm::log(x as f64) }).collect();
        SubcodebookSizes { m, ln_m }
    }
    pub fn num_types(&self) -> usize {
        self.m.len()
    }
    /// `M_i` for the 1-based type `i`.
    pub fn m(&self, i: usize) -> u128 {
        self.m[i - 1]
    }
    pub fn ln_m(&self, i: usize) -> f64 {
        self.ln_m[i - 1]
    }
    pub fn is_active(&self, i: usize) -> bool {
        self.m[i - 1] > 0
    }
    pub fn total(&self) -> u128 {
        self.m.iter().sum()
    }
}

/// What to do with cells whose level gives `Ψ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LevelPolicy {
    /// Refuse the configuration.
    #[default]
    Reject,
    /// Drop the cell; its source mass becomes encoder failure.
    Truncate,
}

/// Largest `ln M` representable in the size type.
const LN_MAX_SIZE: f64 = 88.0;

/// `M_i = ⌈k / Ψ_†(k, Υ(i))⌉`, i.e. `ln M_i ≥ −ln Ψ_†(k, Υ(i)) + ln k`.
pub fn choose_m(
    k: usize,
    partition: &TypePartition,
    kind: CodebookKind,
    ctx: &PsiContext,
    policy: LevelPolicy,
) -> Result<SubcodebookSizes> {
    let mut m = Vec::with_capacity(partition.num_types());
    for i in 1..=partition.num_types() {
        let level = partition.level(i);
        let ln_psi = ln_psi(kind, k, level, ctx)?;
        if ln_psi == f64::NEG_INFINITY {
            match policy {
                LevelPolicy::Truncate => {
                    m.push(0);
                    continue;
                }
                LevelPolicy::Reject => bail!(
                    Config,
                    "type {i} has level Υ({i}) = {level} outside ({}, {}) so Ψ_{} = 0 and M_{i} is infinite",
                    ctx.r1sq,
                    ctx.r2sq,
                    kind.as_str()
                ),
            }
        }
        m.push(size_from_ln_psi(k, ln_psi).map_err(|e| match e {
            crate::Error::Resource(msg) => crate::Error::Resource(alloc::format!("type {i}: {msg}")),
            other => other,
        })?);
    }
    Ok(SubcodebookSizes::from_counts(m))
}

/// `⌈k / Ψ⌉` given `ln Ψ`, dividing directly unless `Ψ` underflows.
pub fn size_from_ln_psi(k: usize, ln_psi: f64) -> Result<u128> {
    let kf = k as f64;
    if !(ln_psi <= 0.0) {
        bail!(Numerical, "ln Ψ = {ln_psi} is not a log-probability");
    }
    if ln_psi == f64::NEG_INFINITY {
        bail!(Config, "Ψ = 0 gives an infinite subcodebook");
    }
    let ln_size = libm::log(kf) - ln_psi;
    if ln_size > LN_MAX_SIZE {
        bail!(Resource, "subcodebook size exp({ln_size:.3}) overflows the size type");
    }
    let psi = libm::exp(ln_psi);
    let size = if psi > 1e-300 { kf / psi } else { libm::exp(ln_size) };
    // an integer ratio perturbed by log/exp rounding is not rounded up
    let nearest = libm::round(size);
    let size = if libm::fabs(size - nearest) <= 1e-12 * size { nearest } else { libm::ceil(size) };
    Ok(size.max(1.0) as u128)
}

/// Whether every level `Υ(1), …, Υ(N)` gives a positive `Ψ_†`.
pub fn levels_admissible(partition: &TypePartition, kind: CodebookKind, ctx: &PsiContext) -> bool {
    match kind {
        // levels increase, so the end points decide
        CodebookKind::Spherical => {
            let levels = partition.levels();
            ctx.in_support(levels[1]) && ctx.in_support(levels[levels.len() - 1])
        }
        CodebookKind::Iid => true,
    }
}

/// Smallest `k' > k` whose partition (with `ξ = xi_of(k')`) has every level
/// inside the spherical support, searched up to `limit`.
pub fn minimal_admissible_k(
    k: usize,
    limit: usize,
    sigma2: f64,
    ctx: &PsiContext,
    xi_of: impl Fn(usize) -> Result<f64>,
) -> Option<usize> {
    (k + 1..=limit).find(|&kk| {
        let Ok(xi) = xi_of(kk) else { return false };
        if !(xi > 0.0 && xi < 1.0) {
            return false;
        }
        let kf = kk as f64;
        let top = libm::ceil(2.0 * kf * xi);
        ctx.in_support((1.0 - xi + 1.0 / kf) * sigma2) && ctx.in_support((1.0 - xi + top / kf) * sigma2)
    })
}

/// Overwrites `out` with a point uniform on the sphere of squared radius
/// `radius_sq` (normalised Gaussian vector).
pub fn fill_spherical<R: Rng + ?Sized>(out: &mut [f64], radius_sq: f64, rng: &mut R) {
    loop {
        let mut norm_sq = 0.0;
        for x in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x = z;
            norm_sq += z * z;
        }
        if norm_sq > 0.0 {
            let scale = libm::sqrt(radius_sq / norm_sq);
            for x in out.iter_mut() {
                *x *= scale;
            }
            return;
        }
    }
}

/// Overwrites `out` with i.i.d. `N(0, variance)` entries.
pub fn fill_iid_gaussian<R: Rng + ?Sized>(out: &mut [f64], variance: f64, rng: &mut R) {
    let sd = libm::sqrt(variance);
    for x in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = sd * z;
    }
}

pub fn sample_spherical<R: Rng + ?Sized>(dim: usize, radius_sq: f64, rng: &mut R) -> Result<Vec<f64>> {
    if dim == 0 || !(radius_sq > 0.0) {
        bail!(Domain, "spherical codeword needs dim >= 1 and radius² > 0 (dim={dim}, radius²={radius_sq})");
    }
    let mut v = alloc::vec![0.0; dim];
    fill_spherical(&mut v, radius_sq, rng);
    Ok(v)
}

pub fn sample_iid_gaussian<R: Rng + ?Sized>(dim: usize, variance: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(variance > 0.0) {
        bail!(Domain, "Gaussian codeword needs variance > 0, got {variance}");
    }
    let mut v = alloc::vec![0.0; dim];
    fill_iid_gaussian(&mut v, variance, rng);
    Ok(v)
}

/// A codeword of `kind` with per-symbol power `power`.
pub fn fill_codeword<R: Rng + ?Sized>(out: &mut [f64], kind: CodebookKind, power: f64, rng: &mut R) {
    match kind {
        CodebookKind::Spherical => fill_spherical(out, out.len() as f64 * power, rng),
        CodebookKind::Iid => fill_iid_gaussian(out, power, rng),
    }
}

/// One realisation of the random code: per-type source and channel
/// subcodebooks, stored flat in type-major, index-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeEnsemble {
    partition: TypePartition,
    k: usize,
    n: usize,
    m: Vec<usize>,
    ln_m: Vec<f64>,
    offsets: Vec<usize>,
    source: Vec<f64>,
    channel: Vec<f64>,
    source_kind: CodebookKind,
    channel_kind: CodebookKind,
}

/// Draws a fresh ensemble: source codewords at power `σ² − D`, channel
/// codewords at power `P`, all mutually independent.
pub fn build_ensemble<R: Rng + ?Sized>(
    config: &SystemConfig,
    partition: &TypePartition,
    sizes: &SubcodebookSizes,
    codeword_cap: u128,
    rng: &mut R,
) -> Result<CodeEnsemble> {
    let total = sizes.total();
    if total > codeword_cap {
        bail!(Resource, "ensemble needs {total} codewords per book, above the cap of {codeword_cap}");
    }
    if sizes.num_types() != partition.num_types() {
        bail!(Config, "{} subcodebook sizes for {} types", sizes.num_types(), partition.num_types());
    }
    let total = total as usize;
    let (k, n) = (config.k, config.n);
    if total.checked_mul(k.max(n)).is_none() {
        bail!(Resource, "ensemble of {total} codewords does not fit in memory");
    }
    let mut source = alloc::vec![0.0; total * k];
    let mut channel = alloc::vec![0.0; total * n];
    let source_power = partition.sigma2() - config.distortion;
    for cw in source.chunks_exact_mut(k) {
        fill_codeword(cw, config.source_codebook, source_power, rng);
    }
    for cw in channel.chunks_exact_mut(n) {
        fill_codeword(cw, config.channel_codebook, config.power, rng);
    }
    let m: Vec<usize> = sizes.m.iter().map(|&x| x as usize).collect();
    CodeEnsemble::from_codewords(partition.clone(), k, n, m, source, channel, config.source_codebook, config.channel_codebook)
}

impl CodeEnsemble {
    /// Assembles an ensemble from explicit codewords.
    #[allow(clippy::too_many_arguments)]
    pub fn from_codewords(
        partition: TypePartition,
        k: usize,
        n: usize,
        m: Vec<usize>,
        source: Vec<f64>,
        channel: Vec<f64>,
        source_kind: CodebookKind,
        channel_kind: CodebookKind,
    ) -> Result<Self> {
        if m.len() != partition.num_types() {
            bail!(Config, "{} subcodebook sizes for {} types", m.len(), partition.num_types());
        }
        if partition.k() != k {
            bail!(Config, "partition built for k={} but codewords have k={k}", partition.k());
        }
        let mut offsets = Vec::with_capacity(m.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &mi in &m {
            acc += mi;
            offsets.push(acc);
        }
        if source.len() != acc * k || channel.len() != acc * n {
            bail!(
                Config,
                "codeword storage mismatch: {} source and {} channel values for {acc} codewords (k={k}, n={n})",
                source.len(),
                channel.len()
            );
        }
        let ln_m = m.iter().map(|&x| if x == 0 { f64::NEG_INFINITY } else { libm::log(x as f64) }).collect();
        Ok(CodeEnsemble { partition, k, n, m, ln_m, offsets, source, channel, source_kind, channel_kind })
    }

    pub fn partition(&self) -> &TypePartition {
        &self.partition
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn num_types(&self) -> usize {
        self.m.len()
    }
    /// `M_i`, 1-based.
    pub fn m(&self, i: usize) -> usize {
        self.m[i - 1]
    }
    pub fn sizes(&self) -> &[usize] {
        &self.m
    }
    pub fn ln_m(&self, i: usize) -> f64 {
        self.ln_m[i - 1]
    }
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }
    pub fn source_kind(&self) -> CodebookKind {
        self.source_kind
    }
    pub fn channel_kind(&self) -> CodebookKind {
        self.channel_kind
    }
    /// Flat position of codeword `(i, j)`.
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.m[i - 1]);
        self.offsets[i - 1] + j - 1
    }
    /// `Ŝ(i, j)`.
    pub fn source_codeword(&self, i: usize, j: usize) -> &[f64] {
        let s = self.slot(i, j);
        &self.source[s * self.k..(s + 1) * self.k]
    }
    /// `X(i, j)`.
    pub fn channel_codeword(&self, i: usize, j: usize) -> &[f64] {
        let s = self.slot(i, j);
        &self.channel[s * self.n..(s + 1) * self.n]
    }
    /// Source subcodebook of type `i`, flat.
    pub fn source_book(&self, i: usize) -> &[f64] {
        &self.source[self.offsets[i - 1] * self.k..self.offsets[i] * self.k]
    }
    /// Channel subcodebook of type `i`, flat.
    pub fn channel_book(&self, i: usize) -> &[f64] {
        &self.channel[self.offsets[i - 1] * self.n..self.offsets[i] * self.n]
    }
    /// All source codewords, type-major then index-major.
    pub fn source_values(&self) -> &[f64] {
        &self.source
    }
    /// All channel codewords, type-major then index-major.
    pub fn channel_values(&self) -> &[f64] {
        &self.channel
    }
    /// The index set `𝒟` in scan order.
    pub fn index_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.m.iter().enumerate().flat_map(|(t, &mi)| (1..=mi).map(move |j| (t + 1, j)))
    }
}

impl core::fmt::Display for Classification {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Classification::Type(i) => write!(f, "T_{i}"),
            Classification::Atypical => f.write_str("atypical"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonexcess::psi_sp;
    use crate::rng::{stream, Domain};

    #[test]
    fn xi_values() {
        assert!((xi_second_order(16).unwrap() - 0.41628).abs() < 1e-5);
        assert!((xi_second_order(10_000).unwrap() - 0.030349).abs() < 1e-6);
        assert!(xi_second_order(1).is_err());
        for k in 3..200 {
            assert!(xi_second_order(k + 1).unwrap() < xi_second_order(k).unwrap());
        }
        assert!((xi_moderate(0.01).unwrap() - 0.031623).abs() < 1e-6);
        assert_eq!(xi_moderate(1.0).unwrap(), 1.0);
        assert!((xi_moderate(0.0625).unwrap() - 0.125).abs() < 1e-15);
        assert!(xi_moderate(0.0).is_err());
        assert!(xi_moderate(1.5).is_err());
    }

    #[test]
    fn partition_shape() {
        let xi = xi_second_order(16).unwrap();
        let p = build_partition(16, xi, 1.0).unwrap();
        assert_eq!(p.num_types(), 14);
        assert_eq!(p.level(0), 1.0 - xi);
        let top = p.level(p.num_types());
        assert!(top >= 1.0 + xi && top < 1.0 + xi + 1.0 / 16.0);
        for w in p.levels().windows(2) {
            assert!((w[1] - w[0] - 1.0 / 16.0).abs() < 1e-12);
        }
        assert!(build_partition(16, 1.0, 1.0).is_err());
        assert!(build_partition(0, 0.5, 1.0).is_err());
    }

    #[test]
    fn classification_boundaries() {
        let p = build_partition(16, xi_second_order(16).unwrap(), 1.0).unwrap();
        assert_eq!(p.classify_power(p.level(0)), Classification::Type(1));
        assert_eq!(p.classify_power(p.level(p.num_types())), Classification::Atypical);
        assert_eq!(p.classify_power(0.5 * (p.level(2) + p.level(3))), Classification::Type(3));
        assert_eq!(p.classify_power(p.level(0) - 1e-9), Classification::Atypical);
        assert_eq!(p.classify_power(f64::NAN), Classification::Atypical);
    }

    #[test]
    fn subcodebook_sizes_follow_psi() {
        let ctx = PsiContext::new(1.0, 0.5).unwrap();
        let p = build_partition(16, xi_second_order(16).unwrap(), 1.0).unwrap();
        let sizes = choose_m(16, &p, CodebookKind::Spherical, &ctx, LevelPolicy::Reject).unwrap();
        for i in 1..=p.num_types() {
            let psi = psi_sp(16, p.level(i), &ctx).unwrap();
            assert_eq!(sizes.m(i), libm::ceil(16.0 / psi) as u128);
        }
        // monotone where Υ(i−1) ≥ |σ² − 2D| = 0
        for w in sizes.m.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn size_rounding() {
        assert_eq!(size_from_ln_psi(16, libm::log(16.0 / 1000.0)).unwrap(), 1000);
        assert_eq!(size_from_ln_psi(4, 0.0).unwrap(), 4);
        assert!(size_from_ln_psi(4, f64::NEG_INFINITY).is_err());
        assert!(matches!(size_from_ln_psi(4, -200.0), Err(crate::Error::Resource(_))));
    }

    #[test]
    fn zero_psi_levels_are_rejected_or_dropped() {
        // σ² = 1, D = 0.05: r₂² ≈ 1.39 sits below the top levels at k = 16
        let ctx = PsiContext::new(1.0, 0.05).unwrap();
        let p = build_partition(16, xi_second_order(16).unwrap(), 1.0).unwrap();
        assert!(!levels_admissible(&p, CodebookKind::Spherical, &ctx));
        let err = choose_m(16, &p, CodebookKind::Spherical, &ctx, LevelPolicy::Reject).unwrap_err();
        assert!(matches!(err, crate::Error::Config(_)));
        let sizes = choose_m(16, &p, CodebookKind::Spherical, &ctx, LevelPolicy::Truncate).unwrap();
        assert!(sizes.m.iter().any(|&m| m == 0));
        assert!(sizes.m.iter().any(|&m| m > 0));
        let k = minimal_admissible_k(16, 100_000, 1.0, &ctx, xi_second_order).unwrap();
        let pk = build_partition(k, xi_second_order(k).unwrap(), 1.0).unwrap();
        assert!(levels_admissible(&pk, CodebookKind::Spherical, &ctx));
    }

    #[test]
    fn spherical_samples_have_exact_norm() {
        let mut rng = stream(1, Domain::Auxiliary, 0);
        for dim in [1usize, 2, 7, 64] {
            let v = sample_spherical(dim, 3.5, &mut rng).unwrap();
            let n2: f64 = v.iter().map(|x| x * x).sum();
            assert!((n2 / 3.5 - 1.0).abs() < 1e-10);
        }
        let mut plus = 0;
        for _ in 0..1000 {
            let v = sample_spherical(1, 4.0, &mut rng).unwrap();
            assert!(v[0] == 2.0 || v[0] == -2.0 || (v[0].abs() - 2.0).abs() < 1e-15);
            if v[0] > 0.0 {
                plus += 1;
            }
        }
        assert!((400..600).contains(&plus));
        assert!(sample_spherical(0, 1.0, &mut rng).is_err());
        assert!(sample_iid_gaussian(0, 1.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn ensemble_layout_and_determinism() {
        let config = SystemConfig {
            power: 2.0,
            distortion: 0.5,
            k: 6,
            n: 5,
            source_codebook: CodebookKind::Spherical,
            channel_codebook: CodebookKind::Spherical,
        };
        let p = build_partition(6, 0.3, 1.0).unwrap();
        let sizes = SubcodebookSizes::from_counts(alloc::vec![3; p.num_types()]);
        let a = build_ensemble(&config, &p, &sizes, 1000, &mut stream(9, Domain::Ensemble, 0)).unwrap();
        let b = build_ensemble(&config, &p, &sizes, 1000, &mut stream(9, Domain::Ensemble, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total() as u128, sizes.total());
        for (i, j) in a.index_set() {
            let s: f64 = a.source_codeword(i, j).iter().map(|x| x * x).sum();
            let x: f64 = a.channel_codeword(i, j).iter().map(|x| x * x).sum();
            assert!((s / (6.0 * 0.5) - 1.0).abs() < 1e-10);
            assert!((x / (5.0 * 2.0) - 1.0).abs() < 1e-10);
        }
        assert!(build_ensemble(&config, &p, &sizes, 2, &mut stream(9, Domain::Ensemble, 0)).is_err());
    }
}
