//! The subcommands as pure functions from a resolved configuration to
//! output text. Nothing here touches the file system.

use nnjscc_core::analytic::{md_constant, separate_md, separate_second_order, DispersionReport};
use nnjscc_core::montecarlo::{
    conditional_decoder_error, rcu_lower, rcu_upper, wilson_interval, BoundEstimate, Scheme, Simulation,
    SimulationSummary, Z_95,
};
use nnjscc_core::nonexcess::{
    psi_iid, psi_sp, psi_sp_lower, psi_sp_upper, r_iid, r_sp, s_star, PsiContext,
};
use nnjscc_core::rng::{stream, Domain};
use nnjscc_core::CodebookKind;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, PsiSection, RcuSection};
use crate::error::{AppError, AppResult};
use crate::output::{fmt_f64, trials_csv, write_ensemble, Csv};
use crate::runner;

/// Resolved scheme parameters echoed next to results.
#[derive(Clone, Debug, Serialize)]
pub struct SchemeEcho {
    pub k: usize,
    pub n: usize,
    pub xi: f64,
    pub num_types: usize,
    /// `Υ(0), …, Υ(N)`.
    pub levels: Vec<f64>,
    /// `M_i` as decimal strings: they can exceed the 64-bit range of JSON
    /// readers.
    pub sizes: Vec<String>,
    pub ln_sizes: Vec<f64>,
}

impl SchemeEcho {
    pub fn new(scheme: &Scheme) -> Self {
        let p = scheme.partition();
        let s = scheme.sizes();
        SchemeEcho {
            k: scheme.config().k,
            n: scheme.config().n,
            xi: p.xi(),
            num_types: p.num_types(),
            levels: p.levels().to_vec(),
            sizes: (1..=s.num_types()).map(|i| s.m(i).to_string()).collect(),
            ln_sizes: (1..=s.num_types()).map(|i| s.ln_m(i)).collect(),
        }
    }
}

fn pretty(value: &impl Serialize) -> AppResult<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// `analyze`: first- and second-order constants, and the scheme when `k`
/// and `n` are given.
pub fn analyze(config: &ExperimentConfig) -> AppResult<String> {
    let report = config.report()?;
    let kind = config.code.channel_codebook;
    let md = |f: fn(&DispersionReport, CodebookKind) -> nnjscc_core::Result<f64>| f(&report, kind).ok();
    let mut out = json!({
        "config": config,
        "report": report,
        "md_constant": md(md_constant),
        "separate_md": md(separate_md),
        "separate_second_order_eps_0_1": separate_second_order(0.1, &report, kind).ok(),
    });
    if config.code.n.is_some() && (config.code.k.is_some() || config.code.md_eta.is_some()) {
        let scheme = config.scheme()?;
        let (k, n) = (scheme.config().k, scheme.config().n);
        out["scheme"] = serde_json::to_value(SchemeEcho::new(&scheme))?;
        out["predicted_eps"] = json!(report.predicted_eps(k, n, kind));
    }
    pretty(&out)
}

/// `psi`: CSV of `Ψ` and its companions over a `(k, p)` grid.
pub fn psi(config: &ExperimentConfig) -> AppResult<String> {
    let sigma2 = config.sigma2()?;
    let ctx = PsiContext::new(sigma2, config.code.distortion).map_err(|e| AppError::Config(e.to_string()))?;
    let section = match &config.psi {
        Some(s) => s.clone(),
        None => PsiSection {
            k: vec![config.code.k.ok_or_else(|| AppError::Config("psi needs a [psi] table or code.k".into()))?],
            p: None,
            p_min: None,
            p_max: None,
            points: 50,
        },
    };
    let grid = match &section.p {
        Some(p) => p.clone(),
        None => {
            let lo = section.p_min.unwrap_or(0.5 * ctx.r1sq);
            let hi = section.p_max.unwrap_or(1.1 * ctx.r2sq);
            if !(lo > 0.0 && hi > lo) || section.points < 2 {
                return Err(AppError::Config(format!(
                    "psi grid needs 0 < p_min < p_max and points >= 2 (got {lo}, {hi}, {})",
                    section.points
                )));
            }
            let step = (hi - lo) / (section.points - 1) as f64;
            (0..section.points).map(|i| lo + step * i as f64).collect()
        }
    };
    let mut ks = section.k.clone();
    ks.sort_unstable();
    if ks.first() == Some(&0) {
        return Err(AppError::Config("psi block lengths must be at least 1".into()));
    }
    let mut csv = Csv::new(&["k", "p", "psi_sp", "g_lower", "g_upper", "psi_iid", "r_sp", "r_iid", "s_star"]);
    let val = |r: nnjscc_core::Result<f64>| -> AppResult<String> {
        match r {
            Ok(v) => Ok(fmt_f64(v)),
            Err(nnjscc_core::Error::Domain(_)) => Ok(fmt_f64(f64::NAN)),
            Err(e) => Err(e.into()),
        }
    };
    for &k in &ks {
        for &p in &grid {
            csv.row(&[
                k.to_string(),
                fmt_f64(p),
                val(psi_sp(k, p, &ctx))?,
                val(psi_sp_lower(k, p, &ctx))?,
                val(psi_sp_upper(k, p, &ctx))?,
                val(psi_iid(k, p, &ctx))?,
                val(r_sp(p, &ctx))?,
                val(r_iid(p, &ctx))?,
                val(s_star(p, &ctx))?,
            ]);
        }
    }
    Ok(csv.into_string())
}

/// Result of `simulate`.
#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub json: String,
    pub summary: SimulationSummary,
    pub trials_csv: Option<String>,
    pub ensemble: Option<Vec<u8>>,
}

/// Extra artefacts `simulate` may produce.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimulateExtras {
    pub trials_csv: bool,
    pub ensemble_dump: bool,
}

/// `simulate`: one Monte Carlo run.
pub fn simulate(config: &ExperimentConfig, extras: SimulateExtras) -> AppResult<SimulateOutput> {
    config.validate_sim()?;
    let scheme = config.scheme()?;
    let sim = Simulation::new(&scheme, config.run_options())?;
    let ensemble = match (extras.ensemble_dump, sim.ensemble()) {
        (false, _) => None,
        (true, Some(ens)) => {
            let mut bytes = Vec::new();
            write_ensemble(ens, &mut bytes)?;
            Some(bytes)
        }
        (true, None) => return Err(AppError::Config("an ensemble dump needs --fixed-ensemble".into())),
    };
    let result = runner::run(&sim, scheme.num_types(), config.sim.trials, config.sim.workers, extras.trials_csv)?;
    let report = scheme.report()?;
    let cfg = scheme.config();
    let json = pretty(&json!({
        "config": config,
        "scheme": SchemeEcho::new(&scheme),
        "predicted_eps": report.predicted_eps(cfg.k, cfg.n, cfg.channel_codebook),
        "summary": result.summary,
    }))?;
    Ok(SimulateOutput {
        json,
        summary: result.summary,
        trials_csv: result.outcomes.as_deref().map(trials_csv),
        ensemble,
    })
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub summary: SimulationSummary,
    pub predicted_eps: f64,
}

/// Runs the `sweep` points; rows sorted by `k`.
pub fn sweep_rows(config: &ExperimentConfig) -> AppResult<Vec<SweepRow>> {
    let mut ks = config
        .sweep
        .as_ref()
        .ok_or_else(|| AppError::Config("sweep needs a [sweep] table with k = [...]".into()))?
        .k
        .clone();
    if ks.is_empty() {
        return Err(AppError::Config("sweep.k is empty".into()));
    }
    ks.sort_unstable();
    ks.dedup();
    let report = config.report()?;
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let mut point = config.clone();
        point.code.k = Some(k);
        point.code.md_eta = None;
        point.sweep = None;
        let out = simulate(&point, SimulateExtras::default())?;
        let n = point.n()?;
        rows.push(SweepRow { k, predicted_eps: report.predicted_eps(k, n, config.code.channel_codebook), summary: out.summary });
    }
    Ok(rows)
}

/// `sweep`: CSV with columns `k, p_e_hat, ci_lo, ci_hi, predicted_eps`.
pub fn sweep(config: &ExperimentConfig) -> AppResult<String> {
    let mut csv = Csv::new(&["k", "p_e_hat", "ci_lo", "ci_hi", "predicted_eps"]);
    for r in sweep_rows(config)? {
        csv.row(&[
            r.k.to_string(),
            fmt_f64(r.summary.p_e_hat),
            fmt_f64(r.summary.wilson_ci.0),
            fmt_f64(r.summary.wilson_ci.1),
            fmt_f64(r.predicted_eps),
        ]);
    }
    Ok(csv.into_string())
}

/// Bound estimates for one type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RcuRow {
    pub type_index: usize,
    pub m: String,
    pub upper: BoundEstimate,
    pub lower: BoundEstimate,
    pub simulated_errors: u64,
    pub simulated_trials: u64,
    pub simulated_rate: f64,
    pub simulated_ci: (f64, f64),
}

/// Evaluates the upper bound, the lower diagnostic and a direct
/// simulation of the decoder error probability for each requested type.
pub fn rcu_rows(config: &ExperimentConfig) -> AppResult<Vec<RcuRow>> {
    let section = config.rcu.clone().unwrap_or_default();
    let scheme = config.scheme()?;
    let types: Vec<usize> = match &section.types {
        Some(t) => t.clone(),
        None => (1..=scheme.num_types()).filter(|&i| scheme.sizes().is_active(i)).collect(),
    };
    let RcuSection { samples, trials, .. } = section;
    let seed = config.sim.master_seed;
    let cap = config.sim.codeword_cap as u128;
    types
        .into_iter()
        .map(|i| {
            let upper = rcu_upper(&scheme, i, samples, &mut stream(seed, Domain::Auxiliary, 2 * i as u64))?;
            let lower = rcu_lower(&scheme, i, samples, &mut stream(seed, Domain::Auxiliary, 2 * i as u64 + 1))?;
            let (errors, trials) =
                conditional_decoder_error(&scheme, i, trials, cap, &mut stream(seed, Domain::Channel, i as u64))?;
            Ok(RcuRow {
                type_index: i,
                m: scheme.sizes().m(i).to_string(),
                upper,
                lower,
                simulated_errors: errors,
                simulated_trials: trials,
                simulated_rate: errors as f64 / trials.max(1) as f64,
                simulated_ci: wilson_interval(errors, trials, Z_95),
            })
        })
        .collect()
}

/// `rcu`: JSON of [`rcu_rows`].
pub fn rcu(config: &ExperimentConfig) -> AppResult<String> {
    let rows = rcu_rows(config)?;
    let scheme = config.scheme()?;
    pretty(&json!({ "config": config, "scheme": SchemeEcho::new(&scheme), "types": rows }))
}
