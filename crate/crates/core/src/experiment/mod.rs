//! Experiment orchestration: hyper-parameter grids over external commands,
//! a brightness-sensitive mock detector, and the darkening sweep harness.

mod grid;
mod mock;
mod sweep;
mod template;

pub use grid::{
    collect_results, execute_manifest, expand_grid, read_grid_spec, select_best, CommandTemplate, Direction, GridSpec,
    ResultRow, ResultsTable, RunConfig, RunManifest, RunOutcome, RunStatus, MANIFEST_FILE, RESULTS_FILE,
};
pub use mock::{mock_detect, MockDetectorConfig};
pub use sweep::{darkening_sweep, CurveRow, CurveTable, Detector, SweepConfig, CURVE_FILE};
pub use template::{placeholders, render};

use crate::error::{Error, Result};

/// Environment variable that overrides every master seed (for CI).
pub const SEED_ENV: &str = "PALLETBENCH_SEED";

/// `explicit`, unless `PALLETBENCH_SEED` is set to a valid integer.
pub fn effective_seed(explicit: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(explicit),
    }
}

/// Run `f` on a pool of `workers` threads; `0` uses the global pool.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
