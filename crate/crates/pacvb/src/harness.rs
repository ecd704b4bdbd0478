//! Rayon front end for the embarrassingly parallel parts. Each unit of work
//! draws from its own seed stream, so output does not depend on the number
//! of workers or on scheduling.

use rayon::prelude::*;
use rayon::ThreadPool;

use pacvb_core::certify::{assemble, prepare, replicate, BoundReport, ExperimentConfig};
use pacvb_core::conditions::{condition_row, summarize, ConditionReport, ConditionRow, ConditionSetup};
use pacvb_core::rng::mix;
use pacvb_core::{FamilyLaw, Result};

use crate::CliError;

/// `None` means one worker per available core.
pub fn pool(workers: Option<usize>) -> std::result::Result<ThreadPool, CliError> {
    if workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn certify(pool: &ThreadPool, config: &ExperimentConfig) -> Result<BoundReport> {
    let prep = prepare(config)?;
    let reps = pool.install(|| (0..config.replications).into_par_iter().map(|r| replicate(&prep, r)).collect());
    Ok(assemble(&prep, reps))
}

/// Condition values at each n; the variance bank at n is seeded by `mix(seed, n)`.
pub fn condition_sweep(
    pool: &ThreadPool,
    setup: &ConditionSetup,
    prior: &FamilyLaw,
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<ConditionRow>> {
    pool.install(|| ns.par_iter().map(|&n| condition_row(setup, n, prior, reps, mix(seed, n as u64))).collect())
}

pub fn conditions(
    pool: &ThreadPool,
    setup: &ConditionSetup,
    prior: &FamilyLaw,
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ConditionReport> {
    summarize(condition_sweep(pool, setup, prior, ns, reps, seed)?)
}
