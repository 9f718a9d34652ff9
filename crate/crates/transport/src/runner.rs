//! Parallel execution of simulation grids.
//!
//! Replications run on a rayon pool; results are collected in replication
//! order before summarizing, so the output does not depend on the number of
//! threads.

use rayon::prelude::*;
use transport_core::sim::{MetricsRow, MetricsTable, McCell, PreparedRateCell, RateDgmConfig, Replicate};
use transport_core::Error;

use crate::error::{AppError, AppResult};

fn pool(threads: Option<usize>) -> AppResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(AppError::config("thread count must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| AppError::config(format!("cannot start worker pool: {e}")))
}

fn warnings(reps: usize) -> Vec<String> {
    if reps == 1 {
        vec!["reps = 1: standard deviations are zero and coverage is a single indicator".into()]
    } else {
        Vec::new()
    }
}

/// Runs every replication of one cell. Replications that fail because of the
/// particular sample drawn (see [`Error::is_sample_failure`]) are dropped and
/// reported in `warnings`; any other error aborts the run.
fn run_cell<F, S>(
    pool: &rayon::ThreadPool,
    reps: usize,
    label: &str,
    run: F,
    summarize: S,
    warnings: &mut Vec<String>,
) -> AppResult<Vec<MetricsRow>>
where
    F: Fn(u64) -> Result<Vec<Replicate>, Error> + Sync,
    S: FnOnce(&[Vec<Replicate>]) -> Vec<MetricsRow>,
{
    let results: Vec<Result<Vec<Replicate>, Error>> =
        pool.install(|| (0..reps).into_par_iter().map(|k| run(k as u64)).collect());
    let mut kept = Vec::with_capacity(reps);
    let mut failed = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => kept.push(o),
            Err(e) if e.is_sample_failure() => failed.push((k, e)),
            Err(e) => return Err(AppError::from(e).context(format!("{label}, replication {k}"))),
        }
    }
    if let Some((k, e)) = failed.first() {
        if kept.is_empty() {
            return Err(AppError::from(e.clone()).context(format!("{label}: every replication failed; replication {k}")));
        }
        warnings.push(format!(
            "{label}: {} of {reps} replications dropped (first: replication {k}: {e})",
            failed.len()
        ));
    }
    Ok(summarize(&kept))
}

/// Runs `reps` replications of every cell. Replication `k` of cell `c` uses
/// the stream derived from `(base_seed, c, k)`.
pub fn run_mc_experiment(cells: &[McCell], reps: usize, base_seed: u64, threads: Option<usize>) -> AppResult<MetricsTable> {
    if reps == 0 {
        return Err(AppError::config("reps must be at least 1"));
    }
    let pool = pool(threads)?;
    let mut table = MetricsTable { rows: Vec::new(), warnings: warnings(reps) };
    for (c, cell) in cells.iter().enumerate() {
        let label = format!("cell {} (config {}, n1 {})", c, cell.correctness.name, cell.dgm.n1);
        let prepared = cell.prepare().map_err(|e| AppError::from(e).context(&label))?;
        let rows = run_cell(
            &pool,
            reps,
            &label,
            |k| prepared.run_replication(base_seed, c as u64, k),
            |kept| prepared.summarize(kept),
            &mut table.warnings,
        )?;
        table.rows.extend(rows);
    }
    Ok(table)
}

pub fn run_rate_experiment(
    configs: &[RateDgmConfig],
    reps: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> AppResult<MetricsTable> {
    if reps == 0 {
        return Err(AppError::config("reps must be at least 1"));
    }
    let pool = pool(threads)?;
    let mut table = MetricsTable { rows: Vec::new(), warnings: warnings(reps) };
    for (c, config) in configs.iter().enumerate() {
        let label = format!("cell {} (n {}, {})", c, config.n, config.label());
        let prepared = PreparedRateCell::new(*config).map_err(|e| AppError::from(e).context(&label))?;
        let rows = run_cell(
            &pool,
            reps,
            &label,
            |k| prepared.run_replication(base_seed, c as u64, k),
            |kept| prepared.summarize(kept),
            &mut table.warnings,
        )?;
        table.rows.extend(rows);
    }
    Ok(table)
}
