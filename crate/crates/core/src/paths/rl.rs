use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use super::{rl_cov, CholeskySampler, FbmMethod, FbmSampler, PathSampler, RlMethod, Scratch};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operators::ToeplitzFft;
use crate::quad::Tolerance;

/// Riemann–Liouville process `W_λ(t) = Γ(λ+½)^{-1} ∫_0^t (t−s)^{λ−½} dB(s)`.
pub struct RlSampler {
    grid: Arc<TimeGrid>,
    lambda: f64,
    kind: Kind,
}

enum Kind {
    Brownian(FbmSampler),
    /// `W(t_j) = Σ_{i<j} c_{j−1−i} ξ_i` with `ξ` i.i.d. standard normal and
    /// `c_k² = ∫_{kh}^{(k+1)h} u^{2λ−1} du / Γ²(λ+½)`, so every marginal
    /// variance is exact however singular the kernel.
    Kernel {
        c: Vec<f64>,
        fft: Option<ToeplitzFft>,
    },
    Cholesky(CholeskySampler),
}

const DIRECT_LIMIT: usize = 96;

impl RlSampler {
    pub fn new(lambda: f64, grid: Arc<TimeGrid>, method: RlMethod) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("λ must be > 0, got {lambda}")));
        }
        let kind = if lambda == 0.5 {
            Kind::Brownian(FbmSampler::new(
                0.5,
                Arc::clone(&grid),
                FbmMethod::Circulant,
            )?)
        } else {
            match method {
                RlMethod::KernelConvolution => {
                    let h = grid.require_uniform_from_zero("kernel-convolution RL sampling")?;
                    let cells = grid.len() - 1;
                    let g = gamma(lambda + 0.5);
                    let l2 = 2.0 * lambda;
                    let hp = h.powf(l2);
                    let c: Vec<f64> = (0..cells)
                        .map(|k| {
                            let k = k as f64;
                            // (k+1)^{2λ} − k^{2λ} without cancellation for large k
                            let d = if k == 0.0 {
                                1.0
                            } else {
                                k.powf(l2) * (l2 * (1.0 / k).ln_1p()).exp_m1()
                            };
                            (hp * d / l2).sqrt() / g
                        })
                        .collect();
                    let fft = (cells > DIRECT_LIMIT).then(|| ToeplitzFft::new(&c));
                    Kind::Kernel { c, fft }
                }
                RlMethod::Cholesky => {
                    let tol = Tolerance::new(1e-14, 1e-11);
                    Kind::Cholesky(CholeskySampler::new(
                        Arc::clone(&grid),
                        Some(lambda),
                        |t, s| rl_cov(lambda, t, s, tol),
                    )?)
                }
            }
        };
        Ok(Self { grid, lambda, kind })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl PathSampler for RlSampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn index(&self) -> Option<f64> {
        Some(self.lambda)
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        match &self.kind {
            Kind::Brownian(b) => b.sample_values(rng, scratch, out),
            Kind::Cholesky(c) => c.sample_values(rng, scratch, out),
            Kind::Kernel { c, fft } => {
                let n = self.grid.len();
                let xi = &mut scratch.noise;
                xi.clear();
                xi.extend((0..n - 1).map(|_| rng.sample::<f64, _>(StandardNormal)));
                out.clear();
                out.resize(n, 0.0);
                let y = &mut out[1..];
                match fft {
                    Some(f) => f.convolve(xi, y),
                    None => {
                        for m in 0..xi.len() {
                            y[m] = (0..=m).map(|k| c[m - k] * xi[k]).sum();
                        }
                    }
                }
            }
        }
    }
}
