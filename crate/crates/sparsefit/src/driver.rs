//! Parallel execution. Work is split into independent units (replications,
//! folds) whose results are collected in index order, so the output does
//! not depend on the number of threads.

use rayon::prelude::*;
use sparsefit_core::sim::{self, ScenarioSpec, SimulationReport};
use sparsefit_core::tuning::{self, CvCurve};
use sparsefit_core::{Dataset, FitResult, Result};

use crate::error::{CliError, CliResult};

pub const THREADS_ENV: &str = "SPARSEFIT_THREADS";

/// Builds a worker pool. `threads = None` falls back to `SPARSEFIT_THREADS`,
/// then to rayon's default.
pub fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{THREADS_ENV}='{v}' is not a thread count")))?,
            ),
            _ => None,
        },
    };
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Runs every replication of `spec` on `pool`.
pub fn simulate(spec: &ScenarioSpec, pool: &rayon::ThreadPool) -> Result<SimulationReport> {
    spec.validate()?;
    let outcomes = pool.install(|| {
        (0..spec.replications as u64)
            .into_par_iter()
            .map(|r| sim::run_replication(spec, r))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(sim::aggregate(spec, &outcomes))
}

/// K-fold CV with folds evaluated in parallel.
pub fn cross_validate<F>(
    d: &Dataset,
    grid: &[f64],
    k: usize,
    seed: u64,
    fit: F,
    pool: &rayon::ThreadPool,
) -> Result<CvCurve>
where
    F: Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>> + Sync,
{
    let folds = tuning::folds(d.n(), k, seed)?;
    let per_fold: Vec<Vec<f64>> = pool.install(|| {
        folds
            .par_iter()
            .map(|v| tuning::fold_losses(d, v, grid, &fit))
            .collect()
    });
    tuning::select(grid, &per_fold)
}
