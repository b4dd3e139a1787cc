//! Monte Carlo estimation of the ensemble excess-distortion probability and
//! of the channel-decoder bounds.
//!
//! Two trial engines are provided. The explicit engine materialises the
//! codebooks and runs [`encode`] and [`decode`]. The order-statistic engine
//! draws the same joint law of `(I, J, Î, Ĵ, distortion)` from scalar
//! distance laws, which keeps trials tractable when `M_i` is astronomically
//! large.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::DispersionReport;
use crate::codec::{decode, encode, sq_dist, sq_norm};
use crate::ensemble::{
    build_ensemble, build_partition, choose_m, fill_codeword, minimal_admissible_k, xi_moderate, xi_second_order,
    Classification, CodeEnsemble, LevelPolicy, SubcodebookSizes, TypePartition,
};
use crate::error::{bail, Result};
use crate::model::{fill_noise, fill_source, NoiseModel, SourceModel, SystemConfig};
use crate::nonexcess::PsiContext;
use crate::order_stat::{draw, draw_above, draw_min, MetricLaw};
use crate::rng::{stream, Domain, Stream};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Largest `k` searched when reporting the smallest admissible source length.
const ADMISSIBLE_K_LIMIT: usize = 10_000_000;

/// How the quantisation range `ξ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiMode {
    /// `ξ = √(ln k / k)`.
    SecondOrder,
    /// `ξ = η^{3/4}`.
    Moderate { eta: f64 },
    /// A fixed `ξ`.
    Fixed { value: f64 },
}

impl XiMode {
    pub fn xi(&self, k: usize) -> Result<f64> {
        match *self {
            XiMode::SecondOrder => xi_second_order(k),
            XiMode::Moderate { eta } => xi_moderate(eta),
            XiMode::Fixed { value } => Ok(value),
        }
    }
}

/// A complete coding scheme: models, system parameters, partition and
/// subcodebook sizes.
#[derive(Clone, Debug)]
pub struct Scheme {
    source: SourceModel,
    noise: NoiseModel,
    config: SystemConfig,
    ctx: PsiContext,
    partition: TypePartition,
    sizes: SubcodebookSizes,
}

impl Scheme {
    /// Builds the scheme with subcodebooks sized from `Ψ`.
    pub fn new(
        source: SourceModel,
        noise: NoiseModel,
        config: SystemConfig,
        xi_mode: XiMode,
        policy: LevelPolicy,
    ) -> Result<Self> {
        config.validate(source.sigma2())?;
        let sigma2 = source.sigma2();
        let ctx = PsiContext::new(sigma2, config.distortion)?;
        let xi = xi_mode.xi(config.k).map_err(as_config)?;
        let partition = build_partition(config.k, xi, sigma2)?;
        let sizes = match choose_m(config.k, &partition, config.source_codebook, &ctx, policy) {
            Ok(sizes) => sizes,
            Err(crate::Error::Config(msg)) => {
                let hint = match minimal_admissible_k(config.k, ADMISSIBLE_K_LIMIT, sigma2, &ctx, |k| xi_mode.xi(k)) {
                    Some(k) => format!("the smallest k above {} that clears it is {k}", config.k),
                    None => format!("no k up to {ADMISSIBLE_K_LIMIT} clears it with this ξ"),
                };
                bail!(Config, "{msg}; {hint}; pass --truncate-types to drop such types instead");
            }
            Err(e) => return Err(e),
        };
        Ok(Scheme { source, noise, config, ctx, partition, sizes })
    }

    /// Builds the scheme with explicitly given subcodebook sizes.
    pub fn with_sizes(
        source: SourceModel,
        noise: NoiseModel,
        config: SystemConfig,
        xi: f64,
        sizes: Vec<u128>,
    ) -> Result<Self> {
        config.validate(source.sigma2())?;
        let ctx = PsiContext::new(source.sigma2(), config.distortion)?;
        let partition = build_partition(config.k, xi, source.sigma2())?;
        if sizes.len() != partition.num_types() {
            bail!(Config, "{} subcodebook sizes given but the partition has {} types", sizes.len(), partition.num_types());
        }
        if sizes.iter().all(|&m| m == 0) {
            bail!(Config, "all subcodebooks are empty");
        }
        Ok(Scheme { source, noise, config, ctx, partition, sizes: SubcodebookSizes::from_counts(sizes) })
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }
    pub fn psi_context(&self) -> &PsiContext {
        &self.ctx
    }
    pub fn partition(&self) -> &TypePartition {
        &self.partition
    }
    pub fn sizes(&self) -> &SubcodebookSizes {
        &self.sizes
    }
    pub fn num_types(&self) -> usize {
        self.partition.num_types()
    }
    /// Dispersion quantities for this scheme's models.
    pub fn report(&self) -> Result<DispersionReport> {
        DispersionReport::new(
            self.config.power,
            self.source.sigma2(),
            self.config.distortion,
            self.source.zeta_s(),
            self.noise.zeta_c(),
        )
    }

    fn source_codeword_power(&self) -> f64 {
        self.source.sigma2() - self.config.distortion
    }
}

fn as_config(e: crate::Error) -> crate::Error {
    match e {
        crate::Error::Domain(msg) => crate::Error::Config(msg),
        other => other,
    }
}

/// Trial outcome category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// The source sequence fell outside every active type class.
    Atypical,
    /// Reproduction within distortion `D`.
    Success,
    /// Correct decoding, distortion above `D`.
    E1,
    /// Wrong type decoded, distortion above `D`.
    E2,
    /// Right type, wrong codeword, distortion above `D`.
    E3,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Atypical => "atypical",
            Category::Success => "success",
            Category::E1 => "e1",
            Category::E2 => "e2",
            Category::E3 => "e3",
        }
    }
    pub fn is_error(&self) -> bool {
        !matches!(self, Category::Success)
    }
}

/// One end-to-end transmission.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub category: Category,
    /// `I`, absent for atypical sources.
    pub type_index: Option<usize>,
    /// `J`.
    pub codeword_index: Option<u128>,
    /// `Î`.
    pub decoded_type: Option<usize>,
    /// `Ĵ`.
    pub decoded_codeword: Option<u128>,
    /// `d(S, Ŝ(Î, Ĵ))`.
    pub distortion: Option<f64>,
}

impl TrialOutcome {
    pub fn atypical() -> Self {
        TrialOutcome {
            category: Category::Atypical,
            type_index: None,
            codeword_index: None,
            decoded_type: None,
            decoded_codeword: None,
            distortion: None,
        }
    }

    /// Classifies a completed transmission.
    pub fn categorize(i: usize, j: u128, i_hat: usize, j_hat: u128, distortion: f64, d_max: f64) -> Self {
        let category = if distortion <= d_max {
            Category::Success
        } else if (i_hat, j_hat) == (i, j) {
            Category::E1
        } else if i_hat != i {
            Category::E2
        } else {
            Category::E3
        };
        TrialOutcome {
            category,
            type_index: Some(i),
            codeword_index: Some(j),
            decoded_type: Some(i_hat),
            decoded_codeword: Some(j_hat),
            distortion: Some(distortion),
        }
    }
}

/// How trials are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Explicit codebooks when they fit under the cap, order statistics
    /// otherwise.
    #[default]
    Auto,
    /// Materialised codebooks with the real encoder and decoder.
    Explicit,
    /// Scalar order-statistic sampling of the same law.
    OrderStatistic,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Auto => "auto",
            Engine::Explicit => "explicit",
            Engine::OrderStatistic => "order_statistic",
        }
    }
}

/// Runs one trial with the explicit engine. `ensemble` fixes the codebooks;
/// otherwise a fresh ensemble is drawn from `rng` after the source.
pub fn run_trial<R: Rng + ?Sized>(
    scheme: &Scheme,
    ensemble: Option<&CodeEnsemble>,
    codeword_cap: u128,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let cfg = &scheme.config;
    let mut s = alloc::vec![0.0; cfg.k];
    fill_source(&scheme.source, &mut s, rng);
    match scheme.partition.classify(&s) {
        Classification::Type(i) if scheme.sizes.is_active(i) => {}
        _ => return Ok(TrialOutcome::atypical()),
    }
    let fresh;
    let ens = match ensemble {
        Some(e) => e,
        None => {
            fresh = build_ensemble(cfg, &scheme.partition, &scheme.sizes, codeword_cap, rng)?;
            &fresh
        }
    };
    let Some(enc) = encode(&s, ens)? else {
        return Ok(TrialOutcome::atypical());
    };
    let mut y = alloc::vec![0.0; cfg.n];
    fill_noise(&scheme.noise, &mut y, rng);
    for (yi, xi) in y.iter_mut().zip(ens.channel_codeword(enc.type_index, enc.codeword_index)) {
        *yi += xi;
    }
    let dec = decode(&y, ens)?;
    let d = sq_dist(&s, ens.source_codeword(dec.type_index, dec.codeword_index)) / cfg.k as f64;
    Ok(TrialOutcome::categorize(
        enc.type_index,
        enc.codeword_index as u128,
        dec.type_index,
        dec.codeword_index as u128,
        d,
        cfg.distortion,
    ))
}

/// Runs one trial with the order-statistic engine (fresh ensemble).
pub fn run_trial_order_statistic<R: Rng + ?Sized>(scheme: &Scheme, rng: &mut R) -> Result<TrialOutcome> {
    let cfg = &scheme.config;
    let sizes = &scheme.sizes;
    let mut s = alloc::vec![0.0; cfg.k];
    fill_source(&scheme.source, &mut s, rng);
    let i = match scheme.partition.classify(&s) {
        Classification::Type(i) if sizes.is_active(i) => i,
        _ => return Ok(TrialOutcome::atypical()),
    };
    let kf = cfg.k as f64;
    let m_i = sizes.m(i);

    // encoder: best of M_I source codewords; by exchangeability J is uniform
    let source_law = MetricLaw::new(cfg.source_codebook, cfg.k, sq_norm(&s), scheme.source_codeword_power());
    let best_source = draw_min(&source_law, m_i, rng)?;
    let j = rng.gen_range(1..=m_i);

    // channel: the transmitted codeword and noise are explicit
    let mut x = alloc::vec![0.0; cfg.n];
    fill_codeword(&mut x, cfg.channel_codebook, cfg.power, rng);
    let mut z = alloc::vec![0.0; cfg.n];
    fill_noise(&scheme.noise, &mut z, rng);
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
    let channel_law = MetricLaw::new(cfg.channel_codebook, cfg.n, sq_norm(&y), cfg.power);

    // decoder: the true codeword against the best competitor of every type
    let mut winner: Option<usize> = None;
    let mut best_score = sq_norm(&z) + 2.0 * sizes.ln_m(i);
    for t in 1..=sizes.num_types() {
        let competitors = sizes.m(t) - u128::from(t == i);
        if competitors == 0 {
            continue;
        }
        let score = draw_min(&channel_law, competitors, rng)? + 2.0 * sizes.ln_m(t);
        if score < best_score {
            best_score = score;
            winner = Some(t);
        }
    }

    let (i_hat, j_hat, metric) = match winner {
        None => (i, j, best_source),
        Some(t) if t == i => {
            let mut other = rng.gen_range(1..m_i);
            if other >= j {
                other += 1;
            }
            // a codeword the encoder passed over lies beyond the optimum
            (i, other, draw_above(&source_law, best_source, rng)?)
        }
        Some(t) => (t, rng.gen_range(1..=sizes.m(t)), draw(&source_law, rng)?),
    };
    Ok(TrialOutcome::categorize(i, j, i_hat, j_hat, metric.max(0.0) / kf, cfg.distortion))
}

/// Counts per outcome category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub atypical: u64,
    pub success: u64,
    pub e1: u64,
    pub e2: u64,
    pub e3: u64,
}

impl CategoryCounts {
    pub fn add(&mut self, c: Category, count: u64) {
        match c {
            Category::Atypical => self.atypical += count,
            Category::Success => self.success += count,
            Category::E1 => self.e1 += count,
            Category::E2 => self.e2 += count,
            Category::E3 => self.e3 += count,
        }
    }
    pub fn total(&self) -> u64 {
        self.atypical + self.success + self.e1 + self.e2 + self.e3
    }
    pub fn errors(&self) -> u64 {
        self.atypical + self.e1 + self.e2 + self.e3
    }
}

/// Mergeable accumulator of trial outcomes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub counts: CategoryCounts,
    /// `(occupancy, errors)` per type, 0-based.
    pub per_type: Vec<(u64, u64)>,
}

impl Tally {
    pub fn new(num_types: usize) -> Self {
        Tally { counts: CategoryCounts::default(), per_type: alloc::vec![(0, 0); num_types] }
    }

    pub fn record(&mut self, outcome: &TrialOutcome) {
        self.counts.add(outcome.category, 1);
        if let Some(i) = outcome.type_index {
            if self.per_type.len() < i {
                self.per_type.resize(i, (0, 0));
            }
            let slot = &mut self.per_type[i - 1];
            slot.0 += 1;
            slot.1 += u64::from(outcome.category.is_error());
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        let c = &other.counts;
        for (cat, n) in [
            (Category::Atypical, c.atypical),
            (Category::Success, c.success),
            (Category::E1, c.e1),
            (Category::E2, c.e2),
            (Category::E3, c.e3),
        ] {
            self.counts.add(cat, n);
        }
        if self.per_type.len() < other.per_type.len() {
            self.per_type.resize(other.per_type.len(), (0, 0));
        }
        for (a, b) in self.per_type.iter_mut().zip(&other.per_type) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    pub fn trials(&self) -> u64 {
        self.counts.total()
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Per-type statistics of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeSummary {
    pub type_index: usize,
    pub occupancy: u64,
    pub errors: u64,
    pub occupancy_rate: f64,
    pub conditional_error_rate: f64,
}

/// Aggregate result of a Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub counts: CategoryCounts,
    pub p_e_hat: f64,
    pub wilson_ci: (f64, f64),
    pub per_type: Vec<TypeSummary>,
    pub master_seed: u64,
    pub engine: Engine,
    pub fixed_ensemble: bool,
}

impl SimulationSummary {
    pub fn from_tally(tally: &Tally, master_seed: u64, engine: Engine, fixed_ensemble: bool) -> Self {
        let trials = tally.trials();
        let errors = tally.counts.errors();
        let p_e_hat = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        let per_type = tally
            .per_type
            .iter()
            .enumerate()
            .map(|(t, &(occ, err))| TypeSummary {
                type_index: t + 1,
                occupancy: occ,
                errors: err,
                occupancy_rate: if trials == 0 { 0.0 } else { occ as f64 / trials as f64 },
                conditional_error_rate: if occ == 0 { 0.0 } else { err as f64 / occ as f64 },
            })
            .collect();
        SimulationSummary {
            trials,
            counts: tally.counts,
            p_e_hat,
            wilson_ci: wilson_interval(errors, trials, Z_95),
            per_type,
            master_seed,
            engine,
            fixed_ensemble,
        }
    }

    /// Atypical rate plus the occupancy-weighted conditional error rates.
    pub fn decomposed_p_e(&self) -> f64 {
        let atypical = if self.trials == 0 { 0.0 } else { self.counts.atypical as f64 / self.trials as f64 };
        atypical + self.per_type.iter().map(|t| t.conditional_error_rate * t.occupancy_rate).sum::<f64>()
    }
}

/// Options of a simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub master_seed: u64,
    pub engine: Engine,
    pub fixed_ensemble: bool,
    pub codeword_cap: u128,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            master_seed: 0,
            engine: Engine::Auto,
            fixed_ensemble: false,
            codeword_cap: crate::ensemble::DEFAULT_CODEWORD_CAP,
        }
    }
}

/// A prepared run: resolved engine plus the fixed ensemble if requested.
/// Trial `t` always uses stream `t` of the trial domain, so any split of
/// the trial range gives the same outcomes.
#[derive(Clone, Debug)]
pub struct Simulation<'a> {
    scheme: &'a Scheme,
    options: RunOptions,
    engine: Engine,
    ensemble: Option<CodeEnsemble>,
}

impl<'a> Simulation<'a> {
    pub fn new(scheme: &'a Scheme, options: RunOptions) -> Result<Self> {
        let fits = scheme.sizes.total() <= options.codeword_cap;
        let engine = match options.engine {
            Engine::Auto if fits => Engine::Explicit,
            Engine::Auto => Engine::OrderStatistic,
            e => e,
        };
        if engine == Engine::Explicit && !fits {
            bail!(
                Resource,
                "explicit ensemble needs {} codewords per book, above the cap of {}",
                scheme.sizes.total(),
                options.codeword_cap
            );
        }
        if options.fixed_ensemble && engine != Engine::Explicit {
            bail!(Config, "a fixed ensemble needs explicit codebooks, which exceed the cap here");
        }
        let ensemble = if options.fixed_ensemble {
            let mut rng = stream(options.master_seed, Domain::Ensemble, 0);
            Some(build_ensemble(&scheme.config, &scheme.partition, &scheme.sizes, options.codeword_cap, &mut rng)?)
        } else {
            None
        };
        Ok(Simulation { scheme, options, engine, ensemble })
    }

    /// The engine actually used.
    pub fn engine(&self) -> Engine {
        self.engine
    }
    pub fn options(&self) -> &RunOptions {
        &self.options
    }
    pub fn ensemble(&self) -> Option<&CodeEnsemble> {
        self.ensemble.as_ref()
    }

    /// Random stream of trial `t`.
    pub fn trial_stream(&self, t: u64) -> Stream {
        stream(self.options.master_seed, Domain::Trial, t)
    }

    pub fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let mut rng = self.trial_stream(t);
        match self.engine {
            Engine::OrderStatistic => run_trial_order_statistic(self.scheme, &mut rng),
            _ => run_trial(self.scheme, self.ensemble.as_ref(), self.options.codeword_cap, &mut rng),
        }
    }

    /// Runs trials `range`, reporting each outcome to `sink`.
    pub fn run_range(&self, range: Range<u64>, mut sink: impl FnMut(u64, &TrialOutcome)) -> Result<Tally> {
        let mut tally = Tally::new(self.scheme.num_types());
        for t in range {
            let outcome = self.trial(t)?;
            sink(t, &outcome);
            tally.record(&outcome);
        }
        Ok(tally)
    }

    pub fn summarize(&self, tally: &Tally) -> SimulationSummary {
        SimulationSummary::from_tally(tally, self.options.master_seed, self.engine, self.options.fixed_ensemble)
    }
}

/// Serial estimate of the excess-distortion probability over `trials`.
pub fn estimate_pe(scheme: &Scheme, trials: u64, options: RunOptions) -> Result<SimulationSummary> {
    if trials == 0 {
        bail!(Usage, "at least one trial is required");
    }
    let sim = Simulation::new(scheme, options)?;
    let tally = sim.run_range(0..trials, |_, _| {})?;
    Ok(sim.summarize(&tally))
}

/// Aggregates an arbitrary trial generator, for studies that bypass the
/// coding scheme.
pub fn estimate_with(
    trials: u64,
    num_types: usize,
    mut trial: impl FnMut(u64) -> Result<TrialOutcome>,
) -> Result<Tally> {
    let mut tally = Tally::new(num_types);
    for t in 0..trials {
        tally.record(&trial(t)?);
    }
    Ok(tally)
}

/// A moderate-deviations operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdSchedule {
    pub eta_n: f64,
    pub k_n: usize,
}

/// `k_n = ⌊n(ρ* − η_n)⌋`.
pub fn md_schedule(n: usize, eta_n: f64, report: &DispersionReport) -> Result<MdSchedule> {
    let rho = report.rho_star;
    if !(eta_n > 0.0 && eta_n < rho) {
        bail!(Domain, "η_n = {eta_n} must lie in (0, ρ* = {rho})");
    }
    let k = libm::floor(n as f64 * (rho - eta_n));
    if !(k >= 1.0) {
        bail!(Domain, "η_n = {eta_n} leaves k_n = {k} < 1 at n = {n}");
    }
    Ok(MdSchedule { eta_n, k_n: k as usize })
}

/// Estimate of a channel-decoder bound with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Minimum outer sample count for the bound estimators.
pub const MIN_BOUND_SAMPLES: u64 = 1000;

fn bound_setup(scheme: &Scheme, i: usize, samples: u64) -> Result<()> {
    if i == 0 || i > scheme.num_types() || !scheme.sizes.is_active(i) {
        bail!(Usage, "type {i} is not an active type of this scheme");
    }
    if samples < MIN_BOUND_SAMPLES {
        bail!(Usage, "bound estimates need at least {MIN_BOUND_SAMPLES} samples, got {samples}");
    }
    Ok(())
}

/// Draws `(‖Z‖², law of ‖X̄ − Y‖²)` for `Y = X + Z`.
fn channel_draw<R: Rng + ?Sized>(scheme: &Scheme, x: &mut [f64], z: &mut [f64], rng: &mut R) -> (f64, MetricLaw) {
    let cfg = &scheme.config;
    fill_codeword(x, cfg.channel_codebook, cfg.power, rng);
    fill_noise(&scheme.noise, z, rng);
    let y_norm = x.iter().zip(z.iter()).map(|(a, b)| (a + b) * (a + b)).sum();
    (sq_norm(z), MetricLaw::new(cfg.channel_codebook, cfg.n, y_norm, cfg.power))
}

fn mean_and_se(sum: f64, sum_sq: f64, samples: u64) -> (f64, f64) {
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, libm::sqrt(var / n))
}

/// Nested estimate of the union-type upper bound on the decoder error
/// probability given type `i`:
/// `min{1, E[Σ_ĩ M_ĩ Pr{‖X̄ − Y‖² + 2 ln M_ĩ ≤ ‖Z‖² + 2 ln M_i | X, Y}]}`.
/// The inner probability is evaluated in closed form for both codebook
/// kinds.
pub fn rcu_upper<R: Rng + ?Sized>(scheme: &Scheme, i: usize, samples: u64, rng: &mut R) -> Result<BoundEstimate> {
    bound_setup(scheme, i, samples)?;
    let sizes = &scheme.sizes;
    let n = scheme.config.n;
    let (mut x, mut z) = (alloc::vec![0.0; n], alloc::vec![0.0; n]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (z_norm, law) = channel_draw(scheme, &mut x, &mut z, rng);
        let mut inner = 0.0;
        for t in 1..=sizes.num_types() {
            if !sizes.is_active(t) {
                continue;
            }
            let threshold = z_norm + 2.0 * (sizes.ln_m(i) - sizes.ln_m(t));
            inner += libm::exp(sizes.ln_m(t) + law.ln_cdf(threshold)?.lower);
        }
        sum += inner;
        sum_sq += inner * inner;
    }
    let (mean, se) = mean_and_se(sum, sum_sq, samples);
    Ok(BoundEstimate { value: mean.min(1.0), std_error: se, samples })
}

/// Nested diagnostic lower estimate
/// `1 − (1 − E[Pr{‖X̄ − Y‖² ≤ ‖X − Y‖² | X, Y}])^{M_i − 1}`.
/// The standard error is propagated through the outer map.
pub fn rcu_lower<R: Rng + ?Sized>(scheme: &Scheme, i: usize, samples: u64, rng: &mut R) -> Result<BoundEstimate> {
    bound_setup(scheme, i, samples)?;
    let n = scheme.config.n;
    let (mut x, mut z) = (alloc::vec![0.0; n], alloc::vec![0.0; n]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (z_norm, law) = channel_draw(scheme, &mut x, &mut z, rng);
        let p = libm::exp(law.ln_cdf(z_norm)?.lower);
        sum += p;
        sum_sq += p * p;
    }
    let (mean, se) = mean_and_se(sum, sum_sq, samples);
    let others = (scheme.sizes.m(i) - 1) as f64;
    let value = -libm::expm1(others * libm::log1p(-mean.min(1.0)));
    // derivative of 1 − (1 − p)^{m}
    let slope = if others > 0.0 { others * libm::pow(1.0 - mean.min(1.0), others - 1.0) } else { 0.0 };
    Ok(BoundEstimate { value, std_error: slope * se, samples })
}

/// Direct simulation of the decoder error rate given type `i`, with fresh
/// explicit codebooks per trial. Returns `(errors, trials)`.
pub fn conditional_decoder_error<R: Rng + ?Sized>(
    scheme: &Scheme,
    i: usize,
    trials: u64,
    codeword_cap: u128,
    rng: &mut R,
) -> Result<(u64, u64)> {
    if i == 0 || i > scheme.num_types() || !scheme.sizes.is_active(i) {
        bail!(Usage, "type {i} is not an active type of this scheme");
    }
    let cfg = &scheme.config;
    let m_i = scheme.sizes.m(i) as usize;
    let mut errors = 0;
    let mut y = alloc::vec![0.0; cfg.n];
    for _ in 0..trials {
        let ens = build_ensemble(cfg, &scheme.partition, &scheme.sizes, codeword_cap, rng)?;
        let j = rng.gen_range(1..=m_i);
        fill_noise(&scheme.noise, &mut y, rng);
        for (yi, xi) in y.iter_mut().zip(ens.channel_codeword(i, j)) {
            *yi += xi;
        }
        let dec = decode(&y, &ens)?;
        errors += u64::from((dec.type_index, dec.codeword_index) != (i, j));
    }
    Ok((errors, trials))
}
