//! Experiment drivers, configuration, results and the command line.

pub mod cli;
pub mod config;
pub mod neural_collapse;
pub mod results;
pub mod sweeps;

pub use cli::{report, run_cli, run_experiment};
pub use config::{Experiment, ExperimentConfig};
pub use neural_collapse::{class_centroids, nc_indicators, CentroidMode, NcIndicators};
pub use sweeps::derive_seed;

use crate::error::{Error, Result};

/// Worker cap from `QMCLAB_THREADS`; 0 or unset means one per core.
pub fn configured_threads() -> Result<usize> {
    match std::env::var("QMCLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("QMCLAB_THREADS must be a non-negative integer, got {v:?}"))),
        _ => Ok(0),
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (0 = automatic).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}
