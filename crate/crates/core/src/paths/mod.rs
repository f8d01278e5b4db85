//! Gaussian path samplers.
//!
//! Each sampler is built once for a grid and then draws path `k` from the
//! ChaCha stream `k` of a [`SeedSpec`], so batches can be generated in any
//! order and on any number of threads with identical results.

mod cholesky;
mod circulant;
mod fbm;
mod rl;
mod stationary;
mod zh;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{GridPath, TimeGrid};
use crate::operators::{ComposedWeighted, PathOperator, RiemannLiouville};
use crate::process::{check_hurst, BaseProcess, ProcessSpec};
use crate::quad::{tanh_sinh, Tolerance};
use crate::rng::SeedSpec;

pub use cholesky::{CholeskySampler, CHOLESKY_MAX_POINTS};
pub use circulant::{CirculantEmbedding, DEFAULT_CLIP};
pub use fbm::FbmSampler;
pub use rl::RlSampler;
pub use stationary::StationarySampler;
pub use zh::{zh_required_truncation, zh_tail_variance_bound, ZhSampler};

/// `E[B_H(t) B_H(s)] = ½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_cov(hurst: f64, t: f64, s: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if t < 0.0 || s < 0.0 {
        return Err(Error::Parameter(format!(
            "fBm covariance needs t, s >= 0, got ({t}, {s})"
        )));
    }
    Ok(fbm_cov_unchecked(hurst, t, s))
}

pub(crate) fn fbm_cov_unchecked(hurst: f64, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

/// `E[W_λ(t) W_λ(s)] = Γ(λ+½)^{-2} ∫_0^{t∧s} (t−u)^{λ−½}(s−u)^{λ−½} du`.
///
/// With `v = t∧s − u` the integrand is `v^{λ−½}(|t−s| + v)^{λ−½}`, singular
/// only at `v = 0`; tanh-sinh receives that distance exactly.
pub fn rl_cov(lambda: f64, t: f64, s: f64, tol: Tolerance) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("λ must be > 0, got {lambda}")));
    }
    if t < 0.0 || s < 0.0 {
        return Err(Error::Parameter(format!(
            "RL covariance needs t, s >= 0, got ({t}, {s})"
        )));
    }
    let lo = t.min(s);
    if lo == 0.0 {
        return Ok(0.0);
    }
    let d = (t - s).abs();
    let a = lambda - 0.5;
    let g = gamma(lambda + 0.5);
    let est = tanh_sinh(|_, v, _| v.powf(a) * (d + v).powf(a), 0.0, lo, tol)?;
    Ok(est.value / (g * g))
}

/// Reusable per-thread buffers for the samplers.
#[derive(Default)]
pub struct Scratch {
    pub(crate) complex: Vec<Complex<f64>>,
    pub(crate) noise: Vec<f64>,
    pub(crate) tmp: Vec<f64>,
}

/// Something that produces Gaussian paths on a fixed grid.
pub trait PathSampler: Send + Sync {
    fn grid(&self) -> &Arc<TimeGrid>;

    /// Declared self-similarity index of the sampled process, if any.
    fn index(&self) -> Option<f64>;

    /// Fill `out` (resized to the grid length) using `rng`.
    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>);

    /// Path number `index` of the family `seed`.
    fn sample(&self, seed: &SeedSpec, index: u64) -> GridPath {
        let mut out = Vec::new();
        self.sample_values(&mut seed.rng(index), &mut Scratch::default(), &mut out);
        GridPath::new(Arc::clone(self.grid()), out, self.index())
            .expect("samplers produce finite values")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    Cholesky,
    #[default]
    Circulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RlMethod {
    Cholesky,
    #[default]
    KernelConvolution,
}

pub fn sample_fbm(
    hurst: f64,
    grid: Arc<TimeGrid>,
    seed: &SeedSpec,
    index: u64,
    method: FbmMethod,
) -> Result<GridPath> {
    Ok(FbmSampler::new(hurst, grid, method)?.sample(seed, index))
}

pub fn sample_rl(
    lambda: f64,
    grid: Arc<TimeGrid>,
    seed: &SeedSpec,
    index: u64,
    method: RlMethod,
) -> Result<GridPath> {
    Ok(RlSampler::new(lambda, grid, method)?.sample(seed, index))
}

/// `truncation` is `M` in `∫_{−M}^0`, `mesh` the number of geometric cells
/// on `[0, M]`, `tail_tol` the admissible bound on the neglected variance.
pub fn sample_zh(
    hurst: f64,
    grid: Arc<TimeGrid>,
    seed: &SeedSpec,
    index: u64,
    truncation: f64,
    mesh: usize,
    tail_tol: f64,
) -> Result<GridPath> {
    Ok(ZhSampler::new(hurst, grid, truncation, mesh, tail_tol)?.sample(seed, index))
}

pub fn sample_stationary<F: Fn(f64) -> f64>(
    cov: F,
    grid: Arc<TimeGrid>,
    seed: &SeedSpec,
    index: u64,
) -> Result<GridPath> {
    Ok(StationarySampler::new(cov, grid)?.sample(seed, index))
}

/// Samples `J_{m,ᾱ}(base)` for a [`ProcessSpec`]: the base path, then `I_γ`,
/// then the weighted-integral chain, all compiled for one grid.
pub struct ProcessSampler {
    spec: ProcessSpec,
    base: Box<dyn PathSampler>,
    smoothing: Option<RiemannLiouville>,
    chain: Option<ComposedWeighted>,
}

impl ProcessSampler {
    /// Uses the FFT samplers on uniform grids from 0 and Cholesky otherwise.
    pub fn new(spec: &ProcessSpec, grid: Arc<TimeGrid>) -> Result<Self> {
        let fast = grid.spacing().is_some() && grid.starts_at_zero();
        Self::with_methods(
            spec,
            grid,
            if fast {
                FbmMethod::Circulant
            } else {
                FbmMethod::Cholesky
            },
            if fast {
                RlMethod::KernelConvolution
            } else {
                RlMethod::Cholesky
            },
        )
    }

    pub fn with_methods(
        spec: &ProcessSpec,
        grid: Arc<TimeGrid>,
        fbm: FbmMethod,
        rl: RlMethod,
    ) -> Result<Self> {
        spec.validate()?;
        let base: Box<dyn PathSampler> = match spec.base {
            BaseProcess::Fbm { hurst } | BaseProcess::FbmFrac { hurst, .. } => {
                Box::new(FbmSampler::new(hurst, Arc::clone(&grid), fbm)?)
            }
            BaseProcess::Rl { lambda } => Box::new(RlSampler::new(lambda, Arc::clone(&grid), rl)?),
        };
        let gamma = spec.gamma();
        let smoothing = if gamma > 0.0 {
            Some(RiemannLiouville::new(Arc::clone(&grid), gamma)?)
        } else {
            None
        };
        let chain = if spec.weights.is_empty() {
            None
        } else {
            Some(ComposedWeighted::new(
                Arc::clone(&grid),
                &spec.weights,
                Some(spec.base_index()),
            )?)
        };
        Ok(Self {
            spec: spec.clone(),
            base,
            smoothing,
            chain,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }
}

impl PathSampler for ProcessSampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        self.base.grid()
    }

    fn index(&self) -> Option<f64> {
        Some(self.spec.self_similarity_index())
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        self.base.sample_values(rng, scratch, out);
        let mut tmp = std::mem::take(&mut scratch.tmp);
        if let Some(op) = &self.smoothing {
            op.apply_values(out, &mut tmp);
            std::mem::swap(out, &mut tmp);
        }
        if let Some(op) = &self.chain {
            op.apply_values(out, &mut tmp);
            std::mem::swap(out, &mut tmp);
        }
        scratch.tmp = tmp;
    }
}

pub fn sample_process(
    spec: &ProcessSpec,
    grid: Arc<TimeGrid>,
    seed: &SeedSpec,
    index: u64,
) -> Result<GridPath> {
    Ok(ProcessSampler::new(spec, grid)?.sample(seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_cov_examples() {
        assert_eq!(fbm_cov(0.5, 1.0, 1.0).unwrap(), 1.0);
        assert!((fbm_cov(0.5, 2.0, 3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((fbm_cov(0.7, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(fbm_cov(1.0, 1.0, 1.0).is_err());
        assert_eq!(
            fbm_cov(0.3, 0.4, 0.9).unwrap(),
            fbm_cov(0.3, 0.9, 0.4).unwrap()
        );
    }

    #[test]
    fn rl_cov_diagonal_matches_closed_form() {
        for lambda in [0.2, 0.5, 1.0, 1.5, 2.5] {
            let g = gamma(lambda + 0.5);
            let exact = 1.0 / (2.0 * lambda * g * g);
            let v = rl_cov(lambda, 1.0, 1.0, Tolerance::default()).unwrap();
            assert!(
                (v - exact).abs() < 1e-10 * exact,
                "λ={lambda}: {v} vs {exact}"
            );
        }
        // λ = ½ is Brownian motion.
        assert!((rl_cov(0.5, 2.0, 0.7, Tolerance::default()).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn process_sampler_declares_index() {
        let grid = Arc::new(TimeGrid::uniform(0.0, 1.0, 64).unwrap());
        let spec = ProcessSpec::integrated_brownian();
        let s = ProcessSampler::new(&spec, grid).unwrap();
        let p = s.sample(&SeedSpec::default(), 3);
        assert_eq!(p.index(), Some(1.5));
        assert_eq!(p.values()[0], 0.0);
    }
}
