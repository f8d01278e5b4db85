use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{param, Result};
use crate::process::{check_admissible, check_hurst};
use crate::quad::{tanh_sinh, Tolerance};

const TOL: Tolerance = Tolerance::new(1e-15, 1e-12);

/// Normalising constant of the Mandelbrot–Van Ness representation,
/// `B_H = a_H (W_H + Z_H)`.
///
/// The integral over `s ∈ (−∞, 0]` is mapped to `[0, 1)` by `u = −s/(1−s)`,
/// giving `∫_0^1 (1−u)^{−2H−1} (1−u^{H−½})² du`.
pub fn a_h(hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    let a = hurst - 0.5;
    if a == 0.0 {
        return Ok(1.0);
    }
    let tail = tanh_sinh(
        |u, _, du| {
            // 1 − u^a, with u = 1 − du kept exact near u = 1.
            let ln_u = if u < 0.5 { u.ln() } else { (-du).ln_1p() };
            let one_minus = -(a * ln_u).exp_m1();
            du.powf(-2.0 * hurst - 1.0) * one_minus * one_minus
        },
        0.0,
        1.0,
        TOL,
    )?;
    Ok(gamma(hurst + 0.5) / (0.5 / hurst + tail.value).sqrt())
}

/// `a_H` through a different change of variables: the integral is split at
/// `s = −1`, the near part is integrated directly and the far part after
/// `s = −1/v`.
pub fn a_h_second_route(hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    let a = hurst - 0.5;
    if a == 0.0 {
        return Ok(1.0);
    }
    let near = tanh_sinh(
        |v, _, _| {
            let d = (1.0 + v).powf(a) - v.powf(a);
            d * d
        },
        0.0,
        1.0,
        TOL,
    )?;
    let far = tanh_sinh(
        |v, _, _| {
            let d = (a * v.ln_1p()).exp_m1();
            v.powf(-2.0 * a - 2.0) * d * d
        },
        0.0,
        1.0,
        TOL,
    )?;
    Ok(gamma(hurst + 0.5) / (0.5 / hurst + near.value + far.value).sqrt())
}

/// `Var W_λ(1) = 1 / (2λ Γ²(λ+½))`.
pub fn sigma2_w(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((-(2.0 * lambda).ln() - 2.0 * ln_gamma(lambda + 0.5)).exp())
}

/// `Var I_γ B_H(1)` from the double integral
/// `Γ(γ)^{−2} ∫∫ x^{2H+1} [(1−x)(1−xy)]^{γ−1} [1 + y^{2H} − (1−y)^{2H}] dx dy`.
///
/// The only singularity for `γ < 1` is the corner `x = y = 1`; the inner
/// rule gets `1 − xy = (1−x) + x(1−y)` from exact endpoint distances.
pub fn sigma2_b0(hurst: f64, gamma_order: f64) -> Result<f64> {
    check_hurst(hurst)?;
    check_gamma(gamma_order)?;
    if gamma_order == 0.0 {
        return Ok(1.0);
    }
    let h2 = 2.0 * hurst;
    let g1 = gamma_order - 1.0;
    let mut failure = None;
    let outer = tanh_sinh(
        |x, _, dx| {
            let inner = tanh_sinh(
                |y, _, dy| {
                    let bracket = 1.0 + y.powf(h2) - dy.powf(h2);
                    (dx * (dx + x * dy)).powf(g1) * bracket
                },
                0.0,
                1.0,
                TOL,
            );
            match inner {
                Ok(e) => x.powf(h2 + 1.0) * e.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        Tolerance::new(1e-14, 1e-11),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let g = gamma(gamma_order);
    Ok(outer.value / (g * g))
}

/// `2∫_0^∞ r(h) dh` for the stationary transform of `J_{m,ᾱ}(I_γ B_H)`:
/// `2β(2H, 1−H) Γ²(H+1)/Γ²(H+1+γ) / ∏ τ_i²`.
pub fn sigma_tilde2_b(hurst: f64, gamma_order: f64, weights: &[f64]) -> Result<f64> {
    check_hurst(hurst)?;
    check_gamma(gamma_order)?;
    check_admissible(hurst + gamma_order, weights)?;
    let lr = (ln_gamma(hurst + 1.0) - ln_gamma(hurst + 1.0 + gamma_order)).exp();
    Ok(2.0 * beta(2.0 * hurst, 1.0 - hurst) * lr * lr
        / stage_product_sq(hurst + gamma_order, weights))
}

/// Same for `J_{m,ᾱ}(W_λ)`: `(Γ(½)/Γ(λ+1))² / ∏ τ_i²`.
pub fn sigma_tilde2_w(lambda: f64, weights: &[f64]) -> Result<f64> {
    check_lambda(lambda)?;
    check_admissible(lambda, weights)?;
    let s = (ln_gamma(0.5) - ln_gamma(lambda + 1.0)).exp();
    Ok(s * s / stage_product_sq(lambda, weights))
}

fn stage_product_sq(base_index: f64, weights: &[f64]) -> f64 {
    let mut tau = base_index;
    let mut prod = 1.0;
    for a in weights {
        tau += 1.0 - a;
        prod *= tau * tau;
    }
    prod
}

/// `π/√8 · σ̃`, the integral-liminf constant.
pub fn integral_liminf_constant(sigma_tilde2: f64) -> f64 {
    std::f64::consts::PI / 8f64.sqrt() * sigma_tilde2.sqrt()
}

/// Small-ball constant of the weighted sup-norm: `κ / (1 − α/τ)`.
pub fn chung_constant(tau: f64, alpha: f64, kappa: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(param(format!("τ must be > 0, got {tau}")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(param(format!("κ must be > 0, got {kappa}")));
    }
    if !(alpha < tau) {
        return Err(param(format!(
            "α = {alpha} out of range: the constant has a pole at α = τ = {tau}"
        )));
    }
    Ok(kappa / (1.0 - alpha / tau))
}

/// Chung LIL constant `factor · (κ / (1 − α/τ))^τ`; `factor` is `a_H` for the
/// fBm branch and 1 for Riemann–Liouville.
pub fn lil_constant(tau: f64, alpha: f64, kappa: f64, factor: f64) -> Result<f64> {
    Ok(factor * chung_constant(tau, alpha, kappa)?.powf(tau))
}

/// What is known about a small-ball constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KappaValue {
    Exact { value: f64 },
    Bounds { lo: f64, hi: f64 },
    Unknown,
}

impl KappaValue {
    /// Midpoint for bounds, the value itself when exact.
    pub fn point(&self) -> Option<f64> {
        match *self {
            KappaValue::Exact { value } => Some(value),
            KappaValue::Bounds { lo, hi } => Some(0.5 * (lo + hi)),
            KappaValue::Unknown => None,
        }
    }

    pub fn contains(&self, x: f64) -> Option<bool> {
        match *self {
            KappaValue::Exact { value } => Some(x == value),
            KappaValue::Bounds { lo, hi } => Some(lo <= x && x <= hi),
            KappaValue::Unknown => None,
        }
    }
}

/// `κ_λ` of the sup-norm: exact at `λ = ½`, bracketed at `λ = 3/2`.
pub fn kappa_known(lambda: f64) -> KappaValue {
    if lambda == 0.5 {
        KappaValue::Exact {
            value: std::f64::consts::PI.powi(2) / 8.0,
        }
    } else if lambda == 1.5 {
        KappaValue::Bounds {
            lo: 0.375,
            hi: (2.0 * std::f64::consts::PI).powf(2.0 / 3.0) * 0.375,
        }
    } else {
        KappaValue::Unknown
    }
}

/// `κ(λ, q)`; `q = ∞` is the sup-norm.
pub fn kappa_lq_known(lambda: f64, q: f64) -> KappaValue {
    if q == f64::INFINITY {
        kappa_known(lambda)
    } else if lambda == 1.5 && q == 2.0 {
        KappaValue::Exact { value: 0.375 }
    } else {
        KappaValue::Unknown
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(param(format!("λ must be finite and > 0, got {lambda}")))
    }
}

pub(crate) fn check_gamma(g: f64) -> Result<()> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(param(format!("γ must be finite and >= 0, got {g}")))
    }
}
