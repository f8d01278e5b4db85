use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    fbm_cov_unchecked, CholeskySampler, CirculantEmbedding, FbmMethod, PathSampler, Scratch,
};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::process::check_hurst;

/// Fractional Brownian motion sampler.
pub struct FbmSampler {
    grid: Arc<TimeGrid>,
    hurst: f64,
    kind: Kind,
}

enum Kind {
    /// `H = ½`: independent Gaussian increments on any grid.
    Increments,
    /// Fractional Gaussian noise by circulant embedding, then cumulative sum.
    Circulant(CirculantEmbedding),
    Cholesky(CholeskySampler),
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: Arc<TimeGrid>, method: FbmMethod) -> Result<Self> {
        check_hurst(hurst)?;
        let kind = if hurst == 0.5 {
            Kind::Increments
        } else {
            match method {
                FbmMethod::Circulant => {
                    let h = grid.require_uniform_from_zero("circulant fBm sampling")?;
                    let h2 = 2.0 * hurst;
                    let scale = h.powf(h2);
                    // Autocovariance of increments over cells of width h.
                    let acov = |k: usize| {
                        let k = k as f64;
                        0.5 * scale
                            * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
                    };
                    let cells = grid.len() - 1;
                    Kind::Circulant(CirculantEmbedding::new(cells.max(1), acov, 1e-10)?)
                }
                FbmMethod::Cholesky => Kind::Cholesky(CholeskySampler::new(
                    Arc::clone(&grid),
                    Some(hurst),
                    |t, s| Ok(fbm_cov_unchecked(hurst, t, s)),
                )?),
            }
        };
        Ok(Self { grid, hurst, kind })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
}

impl PathSampler for FbmSampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn index(&self) -> Option<f64> {
        Some(self.hurst)
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        let t = self.grid.points();
        match &self.kind {
            Kind::Increments => {
                out.clear();
                out.reserve(t.len());
                let mut acc = 0.0;
                let mut prev = 0.0;
                for &ti in t {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += (ti - prev).sqrt() * z;
                    prev = ti;
                    out.push(acc);
                }
            }
            Kind::Circulant(emb) => {
                out.clear();
                out.resize(t.len(), 0.0);
                if t.len() < 2 {
                    return;
                }
                emb.sample_into(rng, &mut scratch.complex, &mut out[1..]);
                for i in 1..out.len() {
                    out[i] += out[i - 1];
                }
            }
            Kind::Cholesky(c) => c.sample_values(rng, scratch, out),
        }
    }
}
