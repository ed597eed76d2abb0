use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::output::{aggregate_path, run_file_name, save_run_csv, Aggregate};
use super::run::{run_one, Experiment, RunTrace};

/// Environment variable capping the number of runs executed concurrently.
pub const THREADS_ENV: &str = "GAMELAB_THREADS";

/// Thread count from [`THREADS_ENV`], or the number of logical CPUs.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Seeds in canonical order; the run id of a seed is its position here.
pub fn canonical_seeds(seeds: &[u64]) -> Vec<u64> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s
}

/// Outcome of a multi-seed execution.
#[derive(Debug)]
pub struct SuiteReport {
    /// Successful runs, ordered by run id.
    pub runs: Vec<RunTrace>,
    /// Seeds whose run failed, with the error.
    pub failures: Vec<(u64, Error)>,
    pub aggregate: Option<Aggregate>,
}

impl SuiteReport {
    pub fn failure_count(&self) -> usize {
        self.failures.len()
    }
}

/// Runs every seed in memory, in parallel across at most `threads` workers.
pub fn execute_seeds(exp: &Experiment, seeds: &[u64], threads: usize) -> Result<SuiteReport> {
    let seeds = canonical_seeds(seeds);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(u64, Result<RunTrace>)> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(run, &seed)| (seed, run_one(exp, seed, run)))
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(t) => runs.push(t),
            Err(e) => failures.push((seed, e)),
        }
    }
    let aggregate = if runs.is_empty() {
        None
    } else {
        Some(Aggregate::from_runs(&runs)?)
    };
    Ok(SuiteReport {
        runs,
        failures,
        aggregate,
    })
}

/// Runs all seeds and writes one CSV per successful run plus `aggregate.csv`
/// into `dir`. Returns the report and the files written.
pub fn run_suite(exp: &Experiment, seeds: &[u64], dir: &Path, threads: usize) -> Result<(SuiteReport, Vec<PathBuf>)> {
    std::fs::create_dir_all(dir)?;
    let report = execute_seeds(exp, seeds, threads)?;
    let mut written = Vec::new();
    for tr in &report.runs {
        let path = dir.join(run_file_name(tr.run, tr.seed));
        save_run_csv(tr, &path)?;
        written.push(path);
    }
    if let Some(agg) = &report.aggregate {
        let path = aggregate_path(dir);
        agg.save(&path)?;
        written.push(path);
    }
    Ok((report, written))
}
