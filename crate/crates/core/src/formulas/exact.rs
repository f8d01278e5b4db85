//! Exact Brownian small-ball probabilities.

use std::f64::consts::PI;

use libm::erfc;

use crate::error::{param, Result};

/// `P(sup_{[0,1]} |B| < ε)`.
///
/// Small `ε`: the eigenfunction series
/// `(4/π) Σ_k (−1)^k/(2k+1) exp(−(2k+1)² π² / (8ε²))`;
/// large `ε`: the image series `Σ_k (−1)^k [Φ((2k+1)ε) − Φ((2k−1)ε)]`,
/// which converges fast exactly where the first one does not.
pub fn brownian_sup_smallball_exact(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if eps <= 1.0 {
        Ok(log_theta_series(eps).exp())
    } else {
        Ok(image_series(eps))
    }
}

/// `log P(sup_{[0,1]} |B| < ε)`, accurate for tiny probabilities.
pub fn brownian_sup_smallball_log(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if eps <= 1.0 {
        Ok(log_theta_series(eps))
    } else {
        Ok(image_series(eps).ln())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && !eps.is_nan() {
        Ok(())
    } else {
        Err(param(format!("ε must be > 0, got {eps}")))
    }
}

fn log_theta_series(eps: f64) -> f64 {
    let c = PI * PI / (8.0 * eps * eps);
    // Factor out the leading term so nothing underflows.
    let mut sum = 0.0;
    for k in 0..10_000u32 {
        let j = (2 * k + 1) as f64;
        let term = ((-(j * j - 1.0)) * c).exp() / j;
        sum += if k % 2 == 0 { term } else { -term };
        if term < 1e-17 * sum.abs() {
            break;
        }
    }
    (4.0 / PI).ln() - c + sum.ln()
}

fn image_series(eps: f64) -> f64 {
    // Φ(b) − Φ(a) through complementary tails, for accuracy far out.
    let band = |a: f64, b: f64| -> f64 {
        if a >= 0.0 {
            0.5 * (erfc(a / std::f64::consts::SQRT_2) - erfc(b / std::f64::consts::SQRT_2))
        } else {
            1.0 - 0.5 * (erfc(-a / std::f64::consts::SQRT_2) + erfc(b / std::f64::consts::SQRT_2))
        }
    };
    let mut p = band(-eps, eps);
    for k in 1..10_000i32 {
        let kf = k as f64;
        let term = band((2.0 * kf - 1.0) * eps, (2.0 * kf + 1.0) * eps);
        let signed = if k % 2 == 0 { term } else { -term };
        // Symmetric images on both sides.
        p += 2.0 * signed;
        if term < 1e-18 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Probability that a Brownian bridge from `x` to `y` over a step of
/// variance `dt` stays inside `(−ε, ε)`, by the method of images:
/// `Σ_k [φ(y − x − 2kW) − φ(y + x + 2ε − 2kW)] / φ(y − x)` with `W = 2ε`.
pub fn bridge_survival(x: f64, y: f64, dt: f64, eps: f64) -> f64 {
    if !(x.abs() < eps && y.abs() < eps) {
        return 0.0;
    }
    if dt <= 0.0 {
        return 1.0;
    }
    let width = 2.0 * eps;
    let d0 = y - x;
    let r0 = y + x + width;
    let kmax = 2 + (6.0 * dt.sqrt() / width).ceil() as i64;
    let ratio = |d: f64| (-(d * d - d0 * d0) / (2.0 * dt)).exp();
    let mut s = 0.0;
    for k in -kmax..=kmax {
        let shift = 2.0 * k as f64 * width;
        s += ratio(d0 - shift) - ratio(r0 - shift);
    }
    s.clamp(0.0, 1.0)
}
