//! Covariances of the stationary transform `U(t) = X(e^t) e^{−τt}`.
//!
//! Each weighted integral acts on `U` as an exponential filter, so
//! `r_m(h) = (2τ_m)^{−1} ∫ r_{m−1}(h+w) e^{−τ_m|w|} dw`, which is the
//! double integral over `(−∞,0]²` after `w = u − v`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use super::constants::{
    check_gamma, check_lambda, sigma2_b0, sigma2_w, sigma_tilde2_b, sigma_tilde2_w,
};
use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;
use crate::mc::map_paths;
use crate::paths::ProcessSampler;
use crate::process::{check_hurst, BaseProcess, ProcessSpec};
use crate::quad::{gauss_kronrod_breaks, tanh_sinh, Estimate, Tolerance};
use crate::rng::SeedSpec;

/// Deepest chain evaluated by nested quadrature; tables have no limit.
pub const MAX_POINT_DEPTH: usize = 3;

/// Stationary covariance of `B_H(e^t) e^{−Ht}`:
/// `½ (e^{Hh} + e^{−Hh} − e^{Hh}(1 − e^{−h})^{2H})`.
pub fn r_fbm_stationary(hurst: f64, h: f64) -> f64 {
    let h = h.abs();
    if hurst == 0.5 {
        return (-0.5 * h).exp();
    }
    if h > 600.0 {
        // Leading terms once e^{−h} is negligible; avoids ∞·0 at h = ∞.
        return 0.5 * (-hurst * h).exp() + hurst * (-(1.0 - hurst) * h).exp();
    }
    0.5 * (-hurst * h).exp()
        - 0.5 * (hurst * h).exp() * (2.0 * hurst * (-(-h).exp()).ln_1p()).exp_m1()
}

/// Stationary covariance of `W_λ(e^t) e^{−λt}`:
/// `e^{−h/2} Γ(λ+½)^{−2} ∫_0^1 (1 − x e^{−h})^{λ−½} (1−x)^{λ−½} dx`.
pub fn r_lambda(lambda: f64, h: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let h = h.abs();
    if lambda == 0.5 {
        return Ok((-0.5 * h).exp());
    }
    let a = lambda - 0.5;
    let gap = -(-h).exp_m1();
    let e = tanh_sinh(
        |x, _, dx| ((dx + x * gap) * dx).powf(a),
        0.0,
        1.0,
        Tolerance::new(1e-16, 1e-12),
    )?;
    let g = gamma(lambda + 0.5);
    Ok((-0.5 * h).exp() * e.value / (g * g))
}

/// Stationary covariance of `I_γ B_H`,
/// `Γ(γ)^{−2} ∫∫ φ(x)φ(y) r_{fBm}(h + ln x − ln y) dx dy` with
/// `φ(x) = (1−x)^{γ−1} x^H`. At `H = ½` this is `r_{½+γ}`.
pub fn r_smoothed(hurst: f64, gamma_order: f64, h: f64) -> Result<f64> {
    check_hurst(hurst)?;
    check_gamma(gamma_order)?;
    if gamma_order == 0.0 {
        return Ok(r_fbm_stationary(hurst, h));
    }
    if hurst == 0.5 {
        return r_lambda(0.5 + gamma_order, h);
    }
    r_smoothed_quadrature(hurst, gamma_order, h)
}

/// The double integral itself, with the inner rule split at the kink
/// `x = y e^{−h}` of the fBm covariance.
pub fn r_smoothed_quadrature(hurst: f64, gamma_order: f64, h: f64) -> Result<f64> {
    let h = h.abs();
    let g1 = gamma_order - 1.0;
    let shrink = (-h).exp();
    let gap = -(-h).exp_m1();
    let inner_tol = Tolerance::new(1e-16, 1e-11);
    let mut failure: Option<Error> = None;
    let outer = tanh_sinh(
        |y, _, dy| {
            let xs = y * shrink;
            if xs <= 0.0 {
                return 0.0;
            }
            let one_minus_xs = dy + y * gap;
            let left = tanh_sinh(
                |x, _, d| {
                    let arg = (-d / xs).ln_1p();
                    (one_minus_xs + d).powf(g1) * x.powf(hurst) * r_fbm_stationary(hurst, arg)
                },
                0.0,
                xs,
                inner_tol,
            );
            let right = tanh_sinh(
                |x, d, dx| {
                    let arg = (d / xs).ln_1p();
                    dx.powf(g1) * x.powf(hurst) * r_fbm_stationary(hurst, arg)
                },
                xs,
                1.0,
                inner_tol,
            );
            match (left, right) {
                (Ok(l), Ok(r)) => dy.powf(g1) * y.powf(hurst) * (l.value + r.value),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        Tolerance::new(1e-15, 1e-10),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let g = gamma(gamma_order);
    Ok(outer.value / (g * g))
}

/// `r(h) ≤ constant · e^{−rate |h|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    pub constant: f64,
    pub rate: f64,
}

impl DecayBound {
    pub fn at(&self, h: f64) -> f64 {
        self.constant * (-self.rate * h.abs()).exp()
    }

    /// Bound after the exponential filter of rate `tau`.
    fn filtered(self, tau: f64) -> Self {
        let mut rate = self.rate;
        if (rate - tau).abs() < 1e-9 * tau {
            rate = 0.9 * tau;
        }
        if rate < tau {
            Self {
                constant: self.constant / (tau * (tau - rate)),
                rate,
            }
        } else {
            Self {
                constant: self.constant / (tau * (rate - tau)),
                rate: tau,
            }
        }
    }

    /// Smallest `L` with `bound(L) ≤ tol`.
    fn cutoff(&self, tol: f64) -> f64 {
        ((self.constant / tol).ln() / self.rate).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Base {
    Fbm { hurst: f64 },
    Rl { lambda: f64 },
    Smoothed { hurst: f64, gamma: f64 },
}

impl Base {
    fn eval(&self, h: f64) -> Result<f64> {
        match *self {
            Base::Fbm { hurst } => Ok(r_fbm_stationary(hurst, h)),
            Base::Rl { lambda } => r_lambda(lambda, h),
            Base::Smoothed { hurst, gamma } => r_smoothed(hurst, gamma, h),
        }
    }

    fn is_cheap(&self) -> bool {
        match *self {
            Base::Fbm { .. } => true,
            Base::Rl { lambda } => lambda == 0.5,
            Base::Smoothed { .. } => false,
        }
    }

    fn bound(&self) -> Result<DecayBound> {
        Ok(match *self {
            Base::Fbm { hurst } => fbm_bound(hurst),
            Base::Rl { lambda } => {
                let g = gamma(lambda + 0.5);
                let constant = if lambda >= 0.5 {
                    1.0 / ((lambda + 0.5) * g * g)
                } else {
                    // (1 − xe^{−h})^{λ−½} ≤ (1 − x)^{λ−½} when λ < ½.
                    sigma2_w(lambda)?
                };
                DecayBound {
                    constant,
                    rate: 0.5,
                }
            }
            Base::Smoothed { hurst, gamma: g } => {
                let b = fbm_bound(hurst);
                if g == 0.0 {
                    b
                } else {
                    let f = beta(g, hurst + 1.0 - b.rate) / gamma(g);
                    DecayBound {
                        constant: b.constant * f * f,
                        rate: b.rate,
                    }
                }
            }
        })
    }

    fn long_run_variance(&self) -> Result<f64> {
        match *self {
            Base::Fbm { hurst } => sigma_tilde2_b(hurst, 0.0, &[]),
            Base::Smoothed { hurst, gamma } => sigma_tilde2_b(hurst, gamma, &[]),
            Base::Rl { lambda } => sigma_tilde2_w(lambda, &[]),
        }
    }
}

fn fbm_bound(hurst: f64) -> DecayBound {
    DecayBound {
        constant: if hurst >= 0.5 { 0.5 + hurst } else { 1.0 },
        rate: hurst.min(1.0 - hurst),
    }
}

/// `r_{m,ᾱ}` for a process specification, with certified exponential tails.
#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    base: Base,
    taus: Vec<f64>,
    bounds: Vec<DecayBound>,
    index: f64,
}

impl StationaryCovariance {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let base = match spec.base {
            BaseProcess::Fbm { hurst } => Base::Fbm { hurst },
            BaseProcess::Rl { lambda } => Base::Rl { lambda },
            BaseProcess::FbmFrac { hurst, gamma: 0.0 } => Base::Fbm { hurst },
            BaseProcess::FbmFrac { hurst, gamma } => Base::Smoothed { hurst, gamma },
        };
        let taus: Vec<f64> = spec.stage_indices()[1..].to_vec();
        let mut bounds = vec![base.bound()?];
        for &t in &taus {
            let next = bounds[bounds.len() - 1].filtered(t);
            bounds.push(next);
        }
        Ok(Self {
            base,
            taus,
            bounds,
            index: spec.self_similarity_index(),
        })
    }

    /// Number of weighted integrals in the chain.
    pub fn depth(&self) -> usize {
        self.taus.len()
    }

    /// Self-similarity index of the untransformed process.
    pub fn index(&self) -> f64 {
        self.index
    }

    pub fn decay_bound(&self) -> DecayBound {
        self.bounds[self.depth()]
    }

    pub fn decay_bound_at_level(&self, level: usize) -> Option<DecayBound> {
        self.bounds.get(level).copied()
    }

    /// `r_m(h)` by nested adaptive quadrature.
    pub fn eval(&self, h: f64) -> Result<f64> {
        if self.depth() > MAX_POINT_DEPTH {
            return Err(param(format!(
                "point evaluation supports chains of depth <= {MAX_POINT_DEPTH}, got {}; use tabulate",
                self.depth()
            )));
        }
        self.eval_level(self.depth(), h.abs())
    }

    /// `Var U(0) = Var X(1)`.
    pub fn variance(&self) -> Result<f64> {
        if self.depth() == 0 {
            return match self.base {
                Base::Fbm { .. } => Ok(1.0),
                Base::Rl { lambda } => sigma2_w(lambda),
                Base::Smoothed { hurst, gamma } => sigma2_b0(hurst, gamma),
            };
        }
        self.eval(0.0)
    }

    fn eval_level(&self, level: usize, h: f64) -> Result<f64> {
        if level == 0 {
            return self.base.eval(h);
        }
        let tau = self.taus[level - 1];
        let below = self.bounds[level - 1];
        // Using evenness, r_ℓ(h) = (2τ)^{−1} ∫_0^∞ r_{ℓ−1}(v) [e^{−τ|v−h|} + e^{−τ(v+h)}] dv;
        // the part beyond L is at most C e^{τh − (c+τ)L} / (τ(c+τ)).
        let tail_tol = 1e-15 * below.constant.max(1e-300);
        let s = below.rate + tau;
        let cutoff = ((tau * h + (below.constant / (tau * s * tail_tol)).ln()) / s).max(h + 1.0);
        if !cutoff.is_finite() || cutoff > 1e5 {
            return Err(param(format!(
                "truncation for r_{level} at h={h} not certifiable (L = {cutoff})"
            )));
        }
        let mut breaks = vec![h];
        let mut x = 1.0;
        while x < cutoff {
            breaks.push(h + x);
            if h > x {
                breaks.push(h - x);
            }
            x *= 2.0;
        }
        breaks.sort_by(f64::total_cmp);
        let tol = if level == self.depth() {
            Tolerance::new(1e-14, 1e-11)
        } else {
            Tolerance::new(1e-15, 1e-12)
        };
        let mut failure = None;
        let est = gauss_kronrod_breaks(
            |v| match self.eval_level(level - 1, v) {
                Ok(r) => r * ((-tau * (v - h).abs()).exp() + (-tau * (v + h)).exp()),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            0.0,
            cutoff,
            &breaks,
            tol,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(est.value / (2.0 * tau))
    }

    /// `σ̃² = 2∫_0^∞ r_m` in closed form: each filter divides it by `τ_i²`.
    pub fn long_run_variance(&self) -> Result<f64> {
        let base = self.base.long_run_variance()?;
        Ok(self.taus.iter().fold(base, |acc, t| acc / (t * t)))
    }

    /// `2∫_0^∞ r_m(h) dh` by quadrature of the point values.
    pub fn long_run_variance_quadrature(&self, tol: Tolerance) -> Result<Estimate> {
        let b = self.decay_bound();
        let cutoff = b.cutoff(1e-12 * b.rate);
        let mut breaks = vec![];
        let mut x = 0.5;
        while x < cutoff {
            breaks.push(x);
            x *= 2.0;
        }
        let mut failure = None;
        let est = gauss_kronrod_breaks(
            |h| match self.eval(h) {
                Ok(r) => r,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            0.0,
            cutoff,
            &breaks,
            tol,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(Estimate {
            value: 2.0 * est.value,
            error: 2.0 * est.error,
            evaluations: est.evaluations,
        })
    }

    /// `r_m(k·spacing)` for `k < n`.
    ///
    /// The base covariance is laid on a fine lag grid and every stage is an
    /// exact convolution of its piecewise-linear interpolant with the
    /// two-sided exponential kernel (forward and backward recursions). Lags
    /// beyond the point where the certified bound drops below `1e−13·C` are 0.
    pub fn tabulate(&self, spacing: f64, n: usize) -> Result<Vec<f64>> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(param(format!("table spacing must be > 0, got {spacing}")));
        }
        let top = self.decay_bound();
        let reach = self
            .bounds
            .iter()
            .map(|b| b.cutoff(1e-13 * b.constant))
            .fold(0.0, f64::max)
            + 1.0;
        if self.depth() == 0 {
            let kmax = ((top.cutoff(1e-13 * top.constant) / spacing).ceil() as usize).min(n);
            let mut out = vec![0.0; n];
            for (k, slot) in out.iter_mut().enumerate().take(kmax) {
                *slot = self.base.eval(k as f64 * spacing)?;
            }
            return Ok(out);
        }
        let sub = (spacing / FINE_STEP).ceil().max(1.0) as usize;
        let delta = spacing / sub as f64;
        let len = (reach / delta).ceil() as usize + 2;
        if len > 50_000_000 {
            return Err(param(format!(
                "covariance decays too slowly to tabulate ({len} lags)"
            )));
        }
        let mut f = self.base_table(delta, len)?;
        for &tau in &self.taus {
            f = exp_filter(&f, delta, tau);
        }
        Ok((0..n)
            .map(|k| f.get(k * sub).copied().unwrap_or(0.0))
            .collect())
    }

    fn base_table(&self, delta: f64, len: usize) -> Result<Vec<f64>> {
        if self.base.is_cheap() {
            return (0..len).map(|k| self.base.eval(k as f64 * delta)).collect();
        }
        // Expensive bases go on a coarser grid and are interpolated linearly.
        let coarse = if matches!(self.base, Base::Smoothed { .. }) {
            0.05
        } else {
            0.01
        };
        let step = ((coarse / delta).round() as usize).max(1);
        let nc = len.div_ceil(step) + 1;
        let knots = (0..nc)
            .into_par_iter()
            .map(|j| self.base.eval(j as f64 * step as f64 * delta))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..len)
            .map(|k| {
                let j = k / step;
                let frac = (k % step) as f64 / step as f64;
                knots[j] + frac * (knots[(j + 1).min(nc - 1)] - knots[j])
            })
            .collect())
    }
}

const FINE_STEP: f64 = 0.0025;

/// `g(x_k) = (2τ)^{−1} ∫ f(y) e^{−τ|x_k − y|} dy` for the even function whose
/// values on `x_k = kδ` are `f`, linear between knots and 0 past the end.
fn exp_filter(f: &[f64], delta: f64, tau: f64) -> Vec<f64> {
    let n = f.len();
    let x = tau * delta;
    let e = (-x).exp();
    let i0 = -(-x).exp_m1() / tau;
    // ∫_0^δ u e^{−τu} du = (1 − e^{−x}(1+x))/τ², by series when x is small.
    let i1 = if x < 0.05 {
        // Σ_{k≥2} (−1)^k (k−1) x^k / k!
        let mut term = x * x / 2.0;
        let mut sign = 1.0;
        let mut sum = 0.0;
        for k in 2..14 {
            sum += sign * (k - 1) as f64 * term;
            term *= x / (k + 1) as f64;
            sign = -sign;
        }
        sum / (tau * tau)
    } else {
        (1.0 - e * (1.0 + x)) / (tau * tau)
    };
    let p = i1 / delta;
    let q = i0 - p;
    let mut back = vec![0.0; n];
    for k in (0..n.saturating_sub(1)).rev() {
        back[k] = e * back[k + 1] + q * f[k] + p * f[k + 1];
    }
    let mut fwd = vec![0.0; n];
    fwd[0] = back[0];
    for k in 1..n {
        fwd[k] = e * fwd[k - 1] + p * f[k - 1] + q * f[k];
    }
    fwd.iter()
        .zip(&back)
        .map(|(a, b)| (a + b) / (2.0 * tau))
        .collect()
}

/// `Var X(1)` for the whole chain, by quadrature.
pub fn sigma2_general(spec: &ProcessSpec) -> Result<f64> {
    StationaryCovariance::new(spec)?.variance()
}

/// `r_{m,ᾱ}(h)` for the chain described by `spec`.
pub fn r_rec(spec: &ProcessSpec, h: f64) -> Result<f64> {
    StationaryCovariance::new(spec)?.eval(h)
}

/// Both routes to `Var X(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub quadrature: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z_score: f64,
}

/// Cross-validate the quadrature value against the sample variance of
/// simulated `X(1)`; more than 5 standard errors apart is an error.
pub fn sigma2_general_checked(
    spec: &ProcessSpec,
    n_paths: u64,
    grid_intervals: usize,
    seed: &SeedSpec,
) -> Result<VarianceCheck> {
    if n_paths < 2 {
        return Err(param("need at least 2 paths"));
    }
    let quadrature = sigma2_general(spec)?;
    let grid = Arc::new(TimeGrid::uniform(0.0, 1.0, grid_intervals)?);
    let sampler = ProcessSampler::new(spec, grid)?;
    let ends = map_paths(&sampler, seed, 0..n_paths, |_, v| v[v.len() - 1]);
    let n = ends.len() as f64;
    let m = ends.iter().sum::<f64>() / n;
    let var = ends.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = ends.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let std_error = ((m4 - var * var).max(0.0) / n).sqrt();
    let z_score = (var - quadrature) / std_error;
    let check = VarianceCheck {
        quadrature,
        monte_carlo: var,
        std_error,
        z_score,
    };
    if !(z_score.abs() <= 5.0) {
        return Err(Error::Inconsistency(format!(
            "Var X(1): quadrature {quadrature} vs Monte Carlo {var} ± {std_error} (z = {z_score:.2})"
        )));
    }
    Ok(check)
}
