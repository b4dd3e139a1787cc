//! Parallel trial execution.
//!
//! Trials are cut into fixed-size chunks independent of the worker count.
//! Each trial reads its own counter-addressed stream, and chunk tallies are
//! merged by integer addition, so the result is the same for any number of
//! workers.

use nnjscc_core::montecarlo::{Scheme, Simulation, SimulationSummary, Tally, TrialOutcome};
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

const CHUNK: u64 = 1024;

/// Summary of a run plus, on request, every trial outcome in order.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: SimulationSummary,
    pub outcomes: Option<Vec<TrialOutcome>>,
}

/// Runs `trials` trials of `sim` on `workers` threads.
pub fn run(sim: &Simulation<'_>, num_types: usize, trials: u64, workers: usize, keep: bool) -> AppResult<RunResult> {
    if trials == 0 {
        return Err(AppError::Config("at least one trial is required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| AppError::Io(std::io::Error::other(e)))?;
    let chunks: Vec<u64> = (0..trials.div_ceil(CHUNK)).collect();
    let parts = pool.install(|| {
        chunks
            .par_iter()
            .map(|&c| {
                let range = c * CHUNK..((c + 1) * CHUNK).min(trials);
                let mut kept = Vec::new();
                let tally = sim.run_range(range, |_, o| {
                    if keep {
                        kept.push(*o);
                    }
                })?;
                Ok((tally, kept))
            })
            .collect::<Result<Vec<(Tally, Vec<TrialOutcome>)>, nnjscc_core::Error>>()
    })?;
    let mut tally = Tally::new(num_types);
    let mut outcomes = keep.then(|| Vec::with_capacity(trials as usize));
    for (part, kept) in parts {
        tally.merge(&part);
        if let Some(all) = outcomes.as_mut() {
            all.extend(kept);
        }
    }
    Ok(RunResult { summary: sim.summarize(&tally), outcomes })
}

/// Parallel counterpart of [`nnjscc_core::montecarlo::estimate_pe`].
pub fn estimate_pe(
    scheme: &Scheme,
    trials: u64,
    options: nnjscc_core::montecarlo::RunOptions,
    workers: usize,
) -> AppResult<SimulationSummary> {
    let sim = Simulation::new(scheme, options)?;
    Ok(run(&sim, scheme.num_types(), trials, workers, false)?.summary)
}
