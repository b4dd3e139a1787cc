//! Memoryless source and additive-noise laws.
//!
//! Moments are closed-form for every law; nothing here is estimated.

use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// A symmetric or discrete scalar law with its native parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    /// `N(0, variance)`.
    Gaussian { variance: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Density `exp(-|x|/scale) / (2 scale)`.
    Laplace { scale: f64 },
    /// `±amplitude` with probability one half each.
    RademacherScaled { amplitude: f64 },
    /// Finite list of `(atom, probability)` pairs.
    DiscretePmf { atoms: Vec<(f64, f64)> },
}

/// Name of a [`Law`] family, without parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Gaussian,
    Uniform,
    Laplace,
    RademacherScaled,
    DiscretePmf,
}

/// Raw moments `E[X²]`, `E[X⁴]`, `E[X⁶]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
}

impl Law {
    /// The member of a parametric family with second moment `power`.
    ///
    /// Discrete laws carry their own atoms and cannot be built this way.
    pub fn with_power(kind: LawKind, power: f64) -> Result<Law> {
        if !(power > 0.0 && power.is_finite()) {
            bail!(Config, "power must be positive and finite, got {power}");
        }
        Ok(match kind {
            LawKind::Gaussian => Law::Gaussian { variance: power },
            LawKind::Uniform => Law::Uniform { half_width: libm::sqrt(3.0 * power) },
            LawKind::Laplace => Law::Laplace { scale: libm::sqrt(power / 2.0) },
            LawKind::RademacherScaled => Law::RademacherScaled { amplitude: libm::sqrt(power) },
            LawKind::DiscretePmf => bail!(Config, "discrete_pmf laws are given by their atoms, not by a power"),
        })
    }

    pub fn kind(&self) -> LawKind {
        match self {
            Law::Gaussian { .. } => LawKind::Gaussian,
            Law::Uniform { .. } => LawKind::Uniform,
            Law::Laplace { .. } => LawKind::Laplace,
            Law::RademacherScaled { .. } => LawKind::RademacherScaled,
            Law::DiscretePmf { .. } => LawKind::DiscretePmf,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!(Config, "{name} must be positive and finite, got {v}");
            }
            Ok(())
        };
        match self {
            Law::Gaussian { variance } => positive("variance", *variance),
            Law::Uniform { half_width } => positive("half_width", *half_width),
            Law::Laplace { scale } => positive("scale", *scale),
            Law::RademacherScaled { amplitude } => positive("amplitude", *amplitude),
            Law::DiscretePmf { atoms } => {
                if atoms.is_empty() {
                    bail!(Config, "discrete_pmf needs at least one atom");
                }
                let mut total = 0.0;
                for &(x, p) in atoms {
                    if !x.is_finite() || !(0.0..=1.0).contains(&p) {
                        bail!(Config, "discrete_pmf atom ({x}, {p}) is invalid");
                    }
                    total += p;
                }
                if libm::fabs(total - 1.0) > 1e-9 {
                    bail!(Config, "discrete_pmf probabilities sum to {total}, not 1");
                }
                Ok(())
            }
        }
    }

    /// Exact moments of the law.
    pub fn moments(&self) -> Moments {
        match self {
            Law::Gaussian { variance: v } => Moments { m2: *v, m4: 3.0 * v * v, m6: 15.0 * v * v * v },
            Law::Uniform { half_width: a } => {
                let a2 = a * a;
                Moments { m2: a2 / 3.0, m4: a2 * a2 / 5.0, m6: a2 * a2 * a2 / 7.0 }
            }
            Law::Laplace { scale: b } => {
                let b2 = b * b;
                Moments { m2: 2.0 * b2, m4: 24.0 * b2 * b2, m6: 720.0 * b2 * b2 * b2 }
            }
            Law::RademacherScaled { amplitude: a } => {
                let a2 = a * a;
                Moments { m2: a2, m4: a2 * a2, m6: a2 * a2 * a2 }
            }
            Law::DiscretePmf { atoms } => {
                let mut m = Moments { m2: 0.0, m4: 0.0, m6: 0.0 };
                for &(x, p) in atoms {
                    let x2 = x * x;
                    m.m2 += p * x2;
                    m.m4 += p * x2 * x2;
                    m.m6 += p * x2 * x2 * x2;
                }
                m
            }
        }
    }

    /// The same family scaled by `c` (`X ↦ cX`).
    fn scaled(&self, c: f64) -> Law {
        match self {
            Law::Gaussian { variance } => Law::Gaussian { variance: variance * c * c },
            Law::Uniform { half_width } => Law::Uniform { half_width: half_width * c },
            Law::Laplace { scale } => Law::Laplace { scale: scale * c },
            Law::RademacherScaled { amplitude } => Law::RademacherScaled { amplitude: amplitude * c },
            Law::DiscretePmf { atoms } => Law::DiscretePmf { atoms: atoms.iter().map(|&(x, p)| (x * c, p)).collect() },
        }
    }
}

/// Prepared sampler for a [`Law`].
#[derive(Clone, Debug)]
enum Sampler {
    Gaussian(f64),
    Uniform(f64),
    Laplace(f64),
    Rademacher(f64),
    Discrete(Vec<f64>, WeightedIndex<f64>),
}

impl Sampler {
    fn new(law: &Law) -> Result<Sampler> {
        Ok(match law {
            Law::Gaussian { variance } => Sampler::Gaussian(libm::sqrt(*variance)),
            Law::Uniform { half_width } => Sampler::Uniform(*half_width),
            Law::Laplace { scale } => Sampler::Laplace(*scale),
            Law::RademacherScaled { amplitude } => Sampler::Rademacher(*amplitude),
            Law::DiscretePmf { atoms } => {
                let values = atoms.iter().map(|a| a.0).collect();
                let index = WeightedIndex::new(atoms.iter().map(|a| a.1))
                    .map_err(|e| crate::Error::Config(alloc::format!("discrete_pmf weights: {e}")))?;
                Sampler::Discrete(values, index)
            }
        })
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Gaussian(sd) => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Sampler::Uniform(a) => a * (2.0 * rng.gen::<f64>() - 1.0),
            Sampler::Laplace(b) => {
                let e: f64 = Exp1.sample(rng);
                if rng.gen::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
            Sampler::Rademacher(a) => {
                if rng.gen::<bool>() {
                    *a
                } else {
                    -*a
                }
            }
            Sampler::Discrete(values, index) => values[index.sample(rng)],
        }
    }
}

/// A memoryless source `S ~ f_S` with `E[S²] = σ²`.
#[derive(Clone, Debug)]
pub struct SourceModel {
    law: Law,
    sigma2: f64,
    zeta_s: f64,
    m6: f64,
    sampler: Sampler,
}

impl SourceModel {
    pub fn law(&self) -> &Law {
        &self.law
    }
    /// Second moment `σ²`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    /// Fourth moment `ζ_s = E[S⁴]`.
    pub fn zeta_s(&self) -> f64 {
        self.zeta_s
    }
    pub fn m6(&self) -> f64 {
        self.m6
    }
}

/// Builds a source model from its law; moments are closed form.
pub fn make_source(law: Law) -> Result<SourceModel> {
    law.validate()?;
    let m = law.moments();
    if !(m.m2 > 0.0) {
        bail!(Config, "source has zero power");
    }
    let sampler = Sampler::new(&law)?;
    Ok(SourceModel { law, sigma2: m.m2, zeta_s: m.m4.max(m.m2 * m.m2), m6: m.m6, sampler })
}

/// Additive noise `Z` normalised to `E[Z²] = 1`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    raw: Law,
    law: Law,
    zeta_c: f64,
    m6: f64,
    sampler: Sampler,
}

impl NoiseModel {
    /// The law as configured, before rescaling.
    pub fn raw_law(&self) -> &Law {
        &self.raw
    }
    /// The unit-power law actually sampled.
    pub fn law(&self) -> &Law {
        &self.law
    }
    /// Fourth moment `ζ_c = E[Z⁴]` of the unit-power noise.
    pub fn zeta_c(&self) -> f64 {
        self.zeta_c
    }
    pub fn m6(&self) -> f64 {
        self.m6
    }
}

/// Builds a noise model, rescaling the law to unit power.
pub fn make_noise(raw: Law) -> Result<NoiseModel> {
    raw.validate()?;
    let power = raw.moments().m2;
    if !(power > 0.0) {
        bail!(Config, "noise has zero power");
    }
    let law = raw.scaled(1.0 / libm::sqrt(power));
    let m = law.moments();
    let sampler = Sampler::new(&law)?;
    Ok(NoiseModel { raw, zeta_c: (m.m4 / (m.m2 * m.m2)).max(1.0), m6: m.m6 / (m.m2 * m.m2 * m.m2), law, sampler })
}

/// Fills `out` with i.i.d. source symbols.
pub fn fill_source<R: Rng + ?Sized>(model: &SourceModel, out: &mut [f64], rng: &mut R) {
    for x in out {
        *x = model.sampler.draw(rng);
    }
}

/// Fills `out` with i.i.d. noise symbols.
pub fn fill_noise<R: Rng + ?Sized>(model: &NoiseModel, out: &mut [f64], rng: &mut R) {
    for x in out {
        *x = model.sampler.draw(rng);
    }
}

/// `k` i.i.d. source symbols.
pub fn sample_source<R: Rng + ?Sized>(model: &SourceModel, k: usize, rng: &mut R) -> Vec<f64> {
    let mut v = alloc::vec![0.0; k];
    fill_source(model, &mut v, rng);
    v
}

/// `n` i.i.d. noise symbols.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, n: usize, rng: &mut R) -> Vec<f64> {
    let mut v = alloc::vec![0.0; n];
    fill_noise(model, &mut v, rng);
    v
}

/// System parameters shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Channel input power `P`.
    pub power: f64,
    /// Distortion level `D`, strictly inside `(0, σ²)`.
    pub distortion: f64,
    /// Source block length `k`.
    pub k: usize,
    /// Channel uses `n`.
    pub n: usize,
    pub source_codebook: crate::CodebookKind,
    pub channel_codebook: crate::CodebookKind,
}

impl SystemConfig {
    pub fn validate(&self, sigma2: f64) -> Result<()> {
        if !(self.power > 0.0 && self.power.is_finite()) {
            bail!(Config, "channel power P must be positive, got {}", self.power);
        }
        if !(self.distortion > 0.0 && self.distortion < sigma2) {
            bail!(Config, "distortion D={} must lie strictly inside (0, σ²={sigma2})", self.distortion);
        }
        if self.k == 0 || self.n == 0 {
            bail!(Config, "k and n must be at least 1 (k={}, n={})", self.k, self.n);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_fourth_moment() {
        let s = make_source(Law::Gaussian { variance: 1.0 }).unwrap();
        assert_eq!(s.sigma2(), 1.0);
        assert_eq!(s.zeta_s(), 3.0);
    }

    #[test]
    fn rademacher_has_deterministic_power() {
        let s = make_source(Law::with_power(LawKind::RademacherScaled, 1.0).unwrap()).unwrap();
        assert_eq!(s.zeta_s(), 1.0);
        let mut rng = stream(3, Domain::Auxiliary, 0);
        assert!(sample_source(&s, 1000, &mut rng).iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn uniform_fourth_moment_matches_quadrature() {
        let a = 3.0f64.sqrt();
        let s = make_source(Law::Uniform { half_width: a }).unwrap();
        let quad = simpson(|x| x.powi(4) / (2.0 * a), -a, a, 2000);
        assert!((s.sigma2() - 1.0).abs() < 1e-15);
        assert!((s.zeta_s() - quad).abs() < 1e-10);
        assert!((s.zeta_s() - 1.8).abs() < 1e-14);
    }

    #[test]
    fn laplace_noise_is_normalised() {
        let z = make_noise(Law::Laplace { scale: 3.0 }).unwrap();
        let b = match z.law() {
            Law::Laplace { scale } => *scale,
            _ => unreachable!(),
        };
        // E[Z^4] by quadrature of the unit-power density
        let quad = 2.0 * simpson(|x| x.powi(4) * (-x / b).exp() / (2.0 * b), 0.0, 60.0 * b, 20_000);
        assert!((z.law().moments().m2 - 1.0).abs() < 1e-14);
        assert!((z.zeta_c() - 6.0).abs() < 1e-12);
        assert!((quad - 6.0).abs() < 1e-8);
        assert_eq!(z.raw_law(), &Law::Laplace { scale: 3.0 });
    }

    #[test]
    fn noise_rescaling_for_every_family() {
        for law in [
            Law::Gaussian { variance: 4.0 },
            Law::Uniform { half_width: 0.1 },
            Law::Laplace { scale: 10.0 },
            Law::RademacherScaled { amplitude: 2.5 },
            Law::DiscretePmf { atoms: alloc::vec![(-1.0, 0.25), (3.0, 0.75)] },
        ] {
            let z = make_noise(law).unwrap();
            assert!((z.law().moments().m2 - 1.0).abs() < 1e-14);
            assert!(z.zeta_c() >= 1.0);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_source(Law::DiscretePmf { atoms: alloc::vec![(1.0, 0.3), (2.0, 0.3)] }).is_err());
        assert!(make_source(Law::DiscretePmf { atoms: alloc::vec![] }).is_err());
        assert!(make_source(Law::Gaussian { variance: -1.0 }).is_err());
        assert!(make_source(Law::DiscretePmf { atoms: alloc::vec![(0.0, 1.0)] }).is_err());
        assert!(Law::with_power(LawKind::DiscretePmf, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let s = make_source(Law::Gaussian { variance: 1.0 }).unwrap();
        let a = sample_source(&s, 64, &mut stream(11, Domain::Trial, 5));
        let b = sample_source(&s, 64, &mut stream(11, Domain::Trial, 5));
        assert_eq!(a, b);
        let z = make_noise(Law::Gaussian { variance: 1.0 }).unwrap();
        assert_eq!(sample_noise(&z, 8, &mut stream(1, Domain::Trial, 0)), sample_noise(&z, 8, &mut stream(1, Domain::Trial, 0)));
    }

    #[test]
    fn system_config_bounds() {
        let mut c = SystemConfig {
            power: 1.0,
            distortion: 0.5,
            k: 4,
            n: 4,
            source_codebook: crate::CodebookKind::Spherical,
            channel_codebook: crate::CodebookKind::Iid,
        };
        assert!(c.validate(1.0).is_ok());
        c.distortion = 1.0;
        assert!(c.validate(1.0).is_err());
        c.distortion = 0.5;
        c.k = 0;
        assert!(c.validate(1.0).is_err());
    }
}
