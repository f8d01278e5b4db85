//! Deterministic parallel map over sampled paths.
//!
//! Path `k` always comes from stream `k`, and results are collected in index
//! order, so any reduction done afterwards is independent of the thread count.

use rayon::prelude::*;

use crate::paths::{PathSampler, Scratch};
use crate::rng::SeedSpec;

/// `f(k, values_k)` for `k` in `range`, in order.
pub fn map_paths<S, T, F>(sampler: &S, seed: &SeedSpec, range: std::ops::Range<u64>, f: F) -> Vec<T>
where
    S: PathSampler + ?Sized,
    T: Send,
    F: Fn(u64, &[f64]) -> T + Sync + Send,
{
    range
        .into_par_iter()
        .map_init(
            || (Scratch::default(), Vec::new()),
            |(scratch, buf), k| {
                sampler.sample_values(&mut seed.rng(k), scratch, buf);
                f(k, buf)
            },
        )
        .collect()
}

/// Sequential counterpart of [`map_paths`], for use inside outer parallel loops.
pub fn map_paths_seq<S, T, F>(
    sampler: &S,
    seed: &SeedSpec,
    range: std::ops::Range<u64>,
    mut f: F,
) -> Vec<T>
where
    S: PathSampler + ?Sized,
    F: FnMut(u64, &[f64]) -> T,
{
    let mut scratch = Scratch::default();
    let mut buf = Vec::new();
    range
        .map(|k| {
            sampler.sample_values(&mut seed.rng(k), &mut scratch, &mut buf);
            f(k, &buf)
        })
        .collect()
}

/// Run `f` on a dedicated pool of `workers` threads (`0` = rayon default).
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
