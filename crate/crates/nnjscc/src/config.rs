//! Experiment configuration files.
//!
//! Configurations are TOML (or JSON with the same key tree). Unknown keys
//! are rejected. Units: powers and distortions are per-symbol second
//! moments, block lengths are symbol counts, rates are in nats.
//!
//! ```toml
//! [source]
//! kind = "gaussian"          # gaussian | uniform | laplace | rademacher_scaled | discrete_pmf
//! sigma2 = 1.0               # source power σ²; discrete_pmf takes `atoms` instead
//!
//! [channel]
//! noise = "gaussian"         # noise family, rescaled to unit power
//! power = 3.0                # input power constraint P
//!
//! [code]
//! distortion = 0.5           # distortion level D, 0 < D < σ²
//! k = 47                     # source length, or `md_eta` for k = ⌊n(ρ* − η)⌋
//! n = 32                     # channel uses
//! source_codebook = "spherical"
//! channel_codebook = "spherical"
//! xi = { mode = "second_order" }   # or { mode = "moderate", eta = .. } / { mode = "fixed", value = .. }
//!
//! [sim]
//! trials = 10000
//! master_seed = 1
//! workers = 4
//! ```

use std::path::Path;

use nnjscc_core::ensemble::{LevelPolicy, DEFAULT_CODEWORD_CAP};
use nnjscc_core::model::{make_noise, make_source, Law, LawKind, SystemConfig};
use nnjscc_core::montecarlo::{md_schedule, Engine, RunOptions, Scheme, XiMode};
use nnjscc_core::CodebookKind;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Environment variable overriding `sim.codeword_cap`.
pub const CODEWORD_CAP_ENV: &str = "NNJSCC_CODEWORD_CAP";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub code: CodeSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcu: Option<RcuSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: LawKind,
    /// Source power σ² for the parametric families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// `(value, probability)` pairs for `discrete_pmf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Noise family; always rescaled to unit power.
    pub noise: LawKind,
    /// Input power constraint P.
    pub power: f64,
    /// `(value, probability)` pairs for `discrete_pmf` noise, before rescaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    /// Distortion level D.
    pub distortion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Moderate-deviations backoff η; sets `k = ⌊n(ρ* − η)⌋`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub md_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "spherical")]
    pub source_codebook: CodebookKind,
    #[serde(default = "spherical")]
    pub channel_codebook: CodebookKind,
    #[serde(default = "second_order")]
    pub xi: XiMode,
    /// Explicit subcodebook sizes, bypassing the Ψ rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u64>>,
    /// Drop types whose Ψ vanishes instead of rejecting the configuration.
    #[serde(default)]
    pub truncate_types: bool,
}

fn spherical() -> CodebookKind {
    CodebookKind::Spherical
}

fn second_order() -> XiMode {
    XiMode::SecondOrder
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads. Results never depend on it, so it is left out of
    /// the echoed configuration.
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default = "default_cap")]
    pub codeword_cap: u64,
    #[serde(default)]
    pub fixed_ensemble: bool,
    #[serde(default)]
    pub engine: Engine,
}

fn default_trials() -> u64 {
    1000
}

fn default_workers() -> usize {
    1
}

fn default_cap() -> u64 {
    DEFAULT_CODEWORD_CAP as u64
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            trials: default_trials(),
            master_seed: 0,
            workers: default_workers(),
            codeword_cap: default_cap(),
            fixed_ensemble: false,
            engine: Engine::Auto,
        }
    }
}

/// Source lengths of a `sweep` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub k: Vec<usize>,
}

/// Grid of a `psi` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSection {
    pub k: Vec<usize>,
    /// Explicit powers; overrides the `p_min`/`p_max`/`points` grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    50
}

/// Settings of the channel-decoder bound estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcuSection {
    /// Outer samples of each bound.
    #[serde(default = "default_bound_samples")]
    pub samples: u64,
    /// Trials of the direct conditional simulation.
    #[serde(default = "default_bound_samples")]
    pub trials: u64,
    /// Types to evaluate; all active types when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<usize>>,
}

fn default_bound_samples() -> u64 {
    10_000
}

impl Default for RcuSection {
    fn default() -> Self {
        RcuSection { samples: default_bound_samples(), trials: default_bound_samples(), types: None }
    }
}

/// Command-line overrides applied on top of a file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub trials: Option<u64>,
    pub fixed_ensemble: bool,
    pub truncate_types: bool,
    pub codeword_cap: Option<u64>,
}

impl Overrides {
    /// Reads the codeword cap from the environment.
    pub fn with_env(mut self) -> AppResult<Self> {
        if let Ok(raw) = std::env::var(CODEWORD_CAP_ENV) {
            let cap = raw
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("{CODEWORD_CAP_ENV}={raw:?} is not a nonnegative integer")))?;
            self.codeword_cap = Some(cap);
        }
        Ok(self)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.master_seed = seed;
        }
        if let Some(w) = o.workers {
            self.sim.workers = w;
        }
        if let Some(t) = o.trials {
            self.sim.trials = t;
        }
        if let Some(cap) = o.codeword_cap {
            self.sim.codeword_cap = cap;
        }
        self.sim.fixed_ensemble |= o.fixed_ensemble;
        self.code.truncate_types |= o.truncate_types;
    }

    pub fn source_law(&self) -> AppResult<Law> {
        law_of(self.source.kind, self.source.sigma2, self.source.atoms.as_ref(), "source", "sigma2")
    }

    pub fn noise_law(&self) -> AppResult<Law> {
        law_of(self.channel.noise, Some(1.0), self.channel.atoms.as_ref(), "channel", "")
    }

    /// Source power σ² implied by the source block.
    pub fn sigma2(&self) -> AppResult<f64> {
        Ok(make_source(self.source_law()?)?.sigma2())
    }

    pub fn n(&self) -> AppResult<usize> {
        self.code.n.ok_or_else(|| AppError::Config("code.n is required here".into()))
    }

    /// The source length, resolving a moderate-deviations schedule.
    pub fn k(&self) -> AppResult<usize> {
        match (self.code.k, self.code.md_eta) {
            (Some(k), None) => Ok(k),
            (None, Some(eta)) => {
                let report = self.report()?;
                Ok(md_schedule(self.n()?, eta, &report).map_err(as_config)?.k_n)
            }
            (Some(_), Some(_)) => Err(AppError::Config("give either code.k or code.md_eta, not both".into())),
            (None, None) => Err(AppError::Config("code.k or code.md_eta is required here".into())),
        }
    }

    pub fn report(&self) -> AppResult<nnjscc_core::analytic::DispersionReport> {
        let source = make_source(self.source_law()?)?;
        let noise = make_noise(self.noise_law()?)?;
        Ok(nnjscc_core::analytic::DispersionReport::new(
            self.channel.power,
            source.sigma2(),
            self.code.distortion,
            source.zeta_s(),
            noise.zeta_c(),
        )
        .map_err(as_config)?)
    }

    pub fn system(&self) -> AppResult<SystemConfig> {
        Ok(SystemConfig {
            power: self.channel.power,
            distortion: self.code.distortion,
            k: self.k()?,
            n: self.n()?,
            source_codebook: self.code.source_codebook,
            channel_codebook: self.code.channel_codebook,
        })
    }

    /// Builds the coding scheme.
    pub fn scheme(&self) -> AppResult<Scheme> {
        let source = make_source(self.source_law()?)?;
        let noise = make_noise(self.noise_law()?)?;
        let system = self.system()?;
        match &self.code.sizes {
            Some(sizes) => {
                let xi = self.code.xi.xi(system.k).map_err(as_config)?;
                let sizes = sizes.iter().map(|&m| m as u128).collect();
                Ok(Scheme::with_sizes(source, noise, system, xi, sizes)?)
            }
            None => {
                let policy = if self.code.truncate_types { LevelPolicy::Truncate } else { LevelPolicy::Reject };
                Ok(Scheme::new(source, noise, system, self.code.xi, policy)?)
            }
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            master_seed: self.sim.master_seed,
            engine: self.sim.engine,
            fixed_ensemble: self.sim.fixed_ensemble,
            codeword_cap: self.sim.codeword_cap as u128,
        }
    }

    /// Checks the simulation block.
    pub fn validate_sim(&self) -> AppResult<()> {
        if self.sim.trials == 0 {
            return Err(AppError::Config("sim.trials must be at least 1".into()));
        }
        if self.sim.workers == 0 {
            return Err(AppError::Config("sim.workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn as_config(e: nnjscc_core::Error) -> AppError {
    match e {
        nnjscc_core::Error::Domain(msg) => AppError::Config(msg),
        other => AppError::Core(other),
    }
}

fn law_of(
    kind: LawKind,
    power: Option<f64>,
    atoms: Option<&Vec<(f64, f64)>>,
    block: &str,
    power_key: &str,
) -> AppResult<Law> {
    match (kind, atoms) {
        (LawKind::DiscretePmf, Some(atoms)) => Ok(Law::DiscretePmf { atoms: atoms.clone() }),
        (LawKind::DiscretePmf, None) => Err(AppError::Config(format!("{block}.atoms is required for discrete_pmf"))),
        (_, Some(_)) => Err(AppError::Config(format!("{block}.atoms is only valid for discrete_pmf"))),
        (kind, None) => {
            let power =
                power.ok_or_else(|| AppError::Config(format!("{block}.{power_key} is required for {kind:?}")))?;
            Ok(Law::with_power(kind, power)?)
        }
    }
}
