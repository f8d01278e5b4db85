use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use super::{PathSampler, Scratch};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::process::check_hurst;
use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};

/// Upper bound on the variance of the part of `Z_H(t)` driven by `(−∞, −M]`.
///
/// For `x = −s >= M` the mean value theorem gives
/// `|(t+x)^{H−½} − x^{H−½}| <= |H−½|·t·x^{H−3/2}`, and integrating the square
/// over `[M, ∞)` yields `(H−½)² t² M^{2H−2} / ((2−2H) Γ²(H+½))`.
pub fn zh_tail_variance_bound(hurst: f64, t: f64, truncation: f64) -> f64 {
    let a = hurst - 0.5;
    let g = gamma(hurst + 0.5);
    a * a * t * t * truncation.powf(2.0 * hurst - 2.0) / ((2.0 - 2.0 * hurst) * g * g)
}

/// Smallest `M` for which [`zh_tail_variance_bound`] is at most `tol`.
pub fn zh_required_truncation(hurst: f64, t: f64, tol: f64) -> f64 {
    let a = hurst - 0.5;
    if a == 0.0 || t == 0.0 {
        return 0.0;
    }
    let g = gamma(hurst + 0.5);
    let k = tol * (2.0 - 2.0 * hurst) * g * g / (a * a * t * t);
    k.powf(1.0 / (2.0 * hurst - 2.0))
}

/// `Z_H(t) = Γ(H+½)^{-1} ∫_{−∞}^0 ((t−s)^{H−½} − (−s)^{H−½}) dB(s)`, truncated
/// to `[−M, 0]`.
///
/// In `x = −s` the interval `[0, M]` is split into a first cell `[0, x₀]` and
/// `mesh` geometric cells up to `M`. Each cell gets one standard normal, with
/// coefficient `±√(∫_cell k_t(x)² dx)` so the variance contributed by every
/// cell is exact; the kernel has a fixed sign for given `H`.
pub struct ZhSampler {
    grid: Arc<TimeGrid>,
    hurst: f64,
    cells: usize,
    /// Row-major `grid.len() × cells`.
    coef: Vec<f64>,
}

impl ZhSampler {
    pub fn new(
        hurst: f64,
        grid: Arc<TimeGrid>,
        truncation: f64,
        mesh: usize,
        tail_tol: f64,
    ) -> Result<Self> {
        check_hurst(hurst)?;
        if !(truncation > 0.0) || mesh == 0 {
            return Err(Error::Parameter(format!(
                "Z_H needs truncation M > 0 and mesh >= 1, got M={truncation}, mesh={mesh}"
            )));
        }
        let t_max = grid.last();
        let bound = zh_tail_variance_bound(hurst, t_max, truncation);
        if bound > tail_tol {
            return Err(Error::Parameter(format!(
                "Z_H truncation M={truncation} leaves tail variance up to {bound:.3e} > {tail_tol:.3e}; \
                 need M >= {:.6e}",
                zh_required_truncation(hurst, t_max, tail_tol)
            )));
        }
        let n = grid.len();
        if hurst == 0.5 {
            return Ok(Self {
                grid,
                hurst,
                cells: 0,
                coef: Vec::new(),
            });
        }
        let t = grid.points();
        let min_gap = t
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(t.iter().copied().filter(|&x| x > 0.0))
            .fold(f64::INFINITY, f64::min);
        let x0 = if min_gap.is_finite() {
            1e-3 * min_gap
        } else {
            1e-9 * truncation
        }
        .min(1e-3 * truncation);
        let ratio = (truncation / x0).powf(1.0 / mesh as f64);
        let mut edges = Vec::with_capacity(mesh + 2);
        edges.push(0.0);
        edges.extend((0..=mesh).map(|k| x0 * ratio.powi(k as i32)));
        *edges.last_mut().expect("non-empty") = truncation;

        let a = hurst - 0.5;
        let g = gamma(hurst + 0.5);
        let sign = a.signum();
        let tol = Tolerance::new(1e-15, 1e-9);
        let cells = edges.len() - 1;
        let mut coef = vec![0.0; n * cells];
        for (j, &tj) in t.iter().enumerate() {
            if tj == 0.0 {
                continue;
            }
            for c in 0..cells {
                let (lo, hi) = (edges[c], edges[c + 1]);
                let var = if c == 0 {
                    tanh_sinh(
                        |x, _, _| {
                            let k = (tj + x).powf(a) - x.powf(a);
                            k * k
                        },
                        lo,
                        hi,
                        tol,
                    )?
                    .value
                } else {
                    gauss_kronrod(
                        |x| {
                            // (t+x)^a − x^a = x^a·expm1(a·ln(1 + t/x)), stable for x >> t
                            let k = x.powf(a) * (a * (tj / x).ln_1p()).exp_m1();
                            k * k
                        },
                        lo,
                        hi,
                        tol,
                    )?
                    .value
                };
                coef[j * cells + c] = sign * var.max(0.0).sqrt() / g;
            }
        }
        Ok(Self {
            grid,
            hurst,
            cells,
            coef,
        })
    }
}

impl PathSampler for ZhSampler {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn index(&self) -> Option<f64> {
        Some(self.hurst)
    }

    fn sample_values(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut Vec<f64>) {
        out.clear();
        if self.cells == 0 {
            out.resize(self.grid.len(), 0.0);
            return;
        }
        let z = &mut scratch.noise;
        z.clear();
        z.extend((0..self.cells).map(|_| rng.sample::<f64, _>(StandardNormal)));
        out.extend(
            self.coef
                .chunks_exact(self.cells)
                .map(|row| row.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>()),
        );
    }
}
