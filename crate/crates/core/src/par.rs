//! Batch execution of independent trials over stream ids.
//!
//! With the `parallel` feature (default) trials are spread over a rayon
//! pool; without it they run sequentially. Both paths derive stream `i`
//! for simulation `i` and collect in index order, so outputs are identical.

use std::ops::Range;

use crate::engine::{run_trial, EngineError, TrialResult};
use crate::spec::TrialSpec;
use crate::stochastic::derive_stream;

/// Runs simulations `ids` of `spec` under `base_seed`, in index order.
pub fn simulate_range(
    spec: &TrialSpec,
    base_seed: u64,
    ids: Range<u64>,
) -> Result<Vec<TrialResult>, EngineError> {
    let one = |id: u64| run_trial(spec, &mut derive_stream(base_seed, id));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ids.into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.map(one).collect()
    }
}

/// Sequential reference path, always available.
pub fn simulate_range_sequential(
    spec: &TrialSpec,
    base_seed: u64,
    ids: Range<u64>,
) -> Result<Vec<TrialResult>, EngineError> {
    ids.map(|id| run_trial(spec, &mut derive_stream(base_seed, id)))
        .collect()
}

/// `n_rep` simulations with stream ids `0..n_rep`.
pub fn simulate_batch(
    spec: &TrialSpec,
    n_rep: usize,
    base_seed: u64,
) -> Result<Vec<TrialResult>, EngineError> {
    simulate_range(spec, base_seed, 0..n_rep as u64)
}

/// Runs `f` inside a pool of `workers` threads (0 means the rayon default).
/// Without the `parallel` feature `f` simply runs on the current thread.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
