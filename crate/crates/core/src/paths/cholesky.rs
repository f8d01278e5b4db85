use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{PathSampler, Scratch};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Larger grids make the O(n²) per-path cost and O(n³) setup impractical.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

/// Exact sampler from a dense covariance on any grid. Grid points with zero
/// variance (such as `t = 0` for processes started at the origin) are held
/// at 0 and left out of the factorisation.
pub struct CholeskySampler {
    grid: Arc<TimeGrid>,
    index: Option<f64>,
    active: Vec<usize>,
    /// Row-packed lower triangle.
    factor: Vec<f64>,
}

impl CholeskySampler {
    pub fn new<F: Fn(f64, f64) -> Result<f64>>(
        grid: Arc<TimeGrid>,
        index: Option<f64>,
        cov: F,
    ) -> Result<Self> {
        if grid.len() > CHOLESKY_MAX_POINTS {
            return Err(Error::Parameter(format!(
                "Cholesky sampling is limited to {CHOLESKY_MAX_POINTS} grid points, got {}",
                grid.len()
            )));
        }
        let t = grid.points();
        let mut active = Vec::with_capacity(t.len());
        for (i, &ti) in t.iter().enumerate() {
            if cov(ti, ti)? > 0.0 {
                active.push(i);
            }
        }
        let n = active.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in 0..=a {
                let c = cov(t[active[a]], t[active[b]])?;
                m[(a, b)] = c;
                m[(b, a)] = c;
            }
        }
        let chol = m.cholesky().ok_or_else(|| Error::Numeric {
            what: format!("Cholesky factorisation of a {n}×{n} covariance (matrix not numerically positive definite)"),
            residual: f64::NAN,
        })?;
        let l = chol.l();
        let mut factor = Vec::with_capacity(n * (n + 1) / 2);
        for a in 0..n {
            for b in 0..=a {
                factor.push(l[(a, b)]);
            }
        }
        Ok(Self {
            grid,
            index,
            active,
            factor,
        })
    }
}

impl PathSampler for CholeskySampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn index(&self) -> Option<f64> {
        self.index
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        let n = self.active.len();
        let z = &mut scratch.noise;
        z.clear();
        z.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        out.clear();
        out.resize(self.grid.len(), 0.0);
        let mut off = 0;
        for (a, &i) in self.active.iter().enumerate() {
            let row = &self.factor[off..off + a + 1];
            out[i] = row.iter().zip(z.iter()).map(|(l, x)| l * x).sum();
            off += a + 1;
        }
    }
}
