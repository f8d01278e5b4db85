use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{CirculantEmbedding, PathSampler, Scratch, DEFAULT_CLIP};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Stationary Gaussian sequence on a uniform grid by circulant embedding.
pub struct StationarySampler {
    grid: Arc<TimeGrid>,
    embedding: CirculantEmbedding,
}

impl StationarySampler {
    /// `cov(h)` is evaluated at lags `k·spacing`.
    pub fn new<F: Fn(f64) -> f64>(cov: F, grid: Arc<TimeGrid>) -> Result<Self> {
        let h = check_grid(&grid)?;
        let r0 = cov(0.0);
        if !(r0 > 0.0) {
            return Err(Error::Parameter(format!(
                "stationary covariance needs r(0) > 0, got {r0}"
            )));
        }
        let embedding = CirculantEmbedding::new(grid.len(), |k| cov(k as f64 * h), DEFAULT_CLIP)?;
        Ok(Self { grid, embedding })
    }

    /// `table[k] = r(k·spacing)`; lags past the end of the table are taken as 0,
    /// so it should reach `2·next_pow2(n − 1)` unless `r` has decayed by then.
    pub fn from_table(table: &[f64], grid: Arc<TimeGrid>) -> Result<Self> {
        check_grid(&grid)?;
        match table.first() {
            Some(&r0) if r0 > 0.0 => {}
            _ => {
                return Err(Error::Parameter(
                    "stationary covariance table needs r(0) > 0".into(),
                ))
            }
        }
        let embedding = CirculantEmbedding::new(
            grid.len(),
            |k| table.get(k).copied().unwrap_or(0.0),
            DEFAULT_CLIP,
        )?;
        Ok(Self { grid, embedding })
    }

    /// Number of lags a covariance table must cover for any padding attempt.
    pub fn table_len(n_points: usize) -> usize {
        2 * n_points.saturating_sub(1).max(1).next_power_of_two() + 1
    }

    pub fn embedding_size(&self) -> usize {
        self.embedding.embedding_size()
    }
}

fn check_grid(grid: &TimeGrid) -> Result<f64> {
    if grid.len() == 1 {
        return Ok(1.0);
    }
    grid.spacing()
        .ok_or_else(|| Error::Grid("stationary sampling needs a uniform grid".into()))
}

impl PathSampler for StationarySampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn index(&self) -> Option<f64> {
        None
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.grid.len(), 0.0);
        self.embedding.sample_into(rng, &mut scratch.complex, out);
    }
}
