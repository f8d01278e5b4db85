//! Weight functions and the dyadic-block norms of the L^q small-ball results.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// One piece of a weight: constant or `coef · t^exponent` on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Constant { value: f64 },
    Power { coef: f64, exponent: f64 },
}

/// A weight on `(0, ∞)` with bounded support: a tabulation (piecewise
/// constant) optionally mixed with exact power-law pieces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Weight {
    segments: Vec<Segment>,
}

impl Weight {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_segments(mut segments: Vec<Segment>) -> Result<Self> {
        segments.retain(|s| s.hi > s.lo);
        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for s in &segments {
            if !(s.lo >= 0.0) || !s.hi.is_finite() {
                return Err(param(format!(
                    "weight segment ({}, {}] must lie in [0, ∞)",
                    s.lo, s.hi
                )));
            }
            let ok = match s.shape {
                Shape::Constant { value } => value.is_finite(),
                Shape::Power { coef, exponent } => coef.is_finite() && exponent.is_finite(),
            };
            if !ok {
                return Err(param("weight segment has a non-finite parameter"));
            }
        }
        if segments.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(param("weight segments overlap"));
        }
        Ok(Self { segments })
    }

    /// `value · 1_{(a,b]}`.
    pub fn constant(value: f64, a: f64, b: f64) -> Result<Self> {
        Self::from_segments(vec![Segment {
            lo: a,
            hi: b,
            shape: Shape::Constant { value },
        }])
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::constant(1.0, a, b)
    }

    /// `coef · t^exponent` on `(a, b]`.
    pub fn power(coef: f64, exponent: f64, a: f64, b: f64) -> Result<Self> {
        Self::from_segments(vec![Segment {
            lo: a,
            hi: b,
            shape: Shape::Power { coef, exponent },
        }])
    }

    /// Tabulated weight: `values[i]` on `(breaks[i], breaks[i+1]]`.
    pub fn tabulated(breaks: &[f64], values: &[f64]) -> Result<Self> {
        if breaks.len() != values.len() + 1 {
            return Err(param(format!(
                "tabulated weight needs len(breaks) = len(values) + 1, got {} and {}",
                breaks.len(),
                values.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("weight breakpoints must increase strictly"));
        }
        Self::from_segments(
            breaks
                .windows(2)
                .zip(values)
                .map(|(w, &value)| Segment {
                    lo: w[0],
                    hi: w[1],
                    shape: Shape::Constant { value },
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(|s| match s.shape {
            Shape::Constant { value } => value == 0.0,
            Shape::Power { coef, .. } => coef == 0.0,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s.lo < t && t <= s.hi)
            .map_or(0.0, |s| match s.shape {
                Shape::Constant { value } => value,
                Shape::Power { coef, exponent } => coef * t.powf(exponent),
            })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    shape: match s.shape {
                        Shape::Constant { value } => Shape::Constant { value: c * value },
                        Shape::Power { coef, exponent } => Shape::Power {
                            coef: c * coef,
                            exponent,
                        },
                    },
                    ..*s
                })
                .collect(),
        }
    }

    /// `w · 1_{(a,b]}`.
    pub fn restricted(&self, a: f64, b: f64) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .filter_map(|s| {
                    let lo = s.lo.max(a);
                    let hi = s.hi.min(b);
                    (hi > lo).then_some(Segment { lo, hi, ..*s })
                })
                .collect(),
        }
    }

    /// `(lo, hi)` of the support, `None` when empty.
    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.segments.first()?.lo, self.segments.last()?.hi))
    }

    /// `∫_{(a,b]} |w|^q` (`q < ∞`) or `sup_{(a,b]} |w|` (`q = ∞`); may be `+∞`.
    fn block(&self, a: f64, b: f64, q: f64) -> f64 {
        let mut acc = 0.0f64;
        for s in &self.segments {
            let lo = s.lo.max(a);
            let hi = s.hi.min(b);
            if hi <= lo {
                continue;
            }
            let piece = segment_power_integral(s.shape, lo, hi, q);
            acc = if q.is_infinite() {
                acc.max(piece)
            } else {
                acc + piece
            };
        }
        acc
    }
}

fn segment_power_integral(shape: Shape, lo: f64, hi: f64, q: f64) -> f64 {
    match shape {
        Shape::Constant { value } => {
            if q.is_infinite() {
                value.abs()
            } else {
                value.abs().powf(q) * (hi - lo)
            }
        }
        Shape::Power { coef, exponent } => {
            if coef == 0.0 {
                return 0.0;
            }
            if q.is_infinite() {
                return if lo == 0.0 && exponent < 0.0 {
                    f64::INFINITY
                } else {
                    coef.abs() * lo.powf(exponent).max(hi.powf(exponent))
                };
            }
            let e = exponent * q + 1.0;
            let c = coef.abs().powf(q);
            if e == 0.0 {
                if lo == 0.0 {
                    f64::INFINITY
                } else {
                    c * (hi / lo).ln()
                }
            } else if lo == 0.0 && e < 0.0 {
                f64::INFINITY
            } else {
                c * (hi.powf(e) - lo.powf(e)) / e
            }
        }
    }
}

/// `‖w‖_{L^r}`; for `r < 1` this is the quasi-norm `(∫|w|^r)^{1/r}`.
pub fn lr_norm(w: &Weight, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(param(format!("L^r needs r > 0, got {r}")));
    }
    let (lo, hi) = match w.support() {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let v = w.block(lo, hi, r);
    Ok(if r.is_infinite() { v } else { v.powf(1.0 / r) })
}

/// `(Σ_k 2^{krτ} ‖w‖^r_{L^q(2^{k−1}, 2^k]})^{1/r}`, `+∞` when the series
/// diverges. Blocks below the first breakpoint see a single constant or
/// power piece, where the terms are exactly geometric; that tail is summed
/// in closed form.
pub fn w_norm(w: &Weight, r: f64, tau: f64, q: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() || !(tau > 0.0) || !tau.is_finite() || !(q >= 1.0) {
        return Err(param(format!(
            "w_norm needs r, τ > 0 finite and q >= 1, got r={r}, τ={tau}, q={q}"
        )));
    }
    let (lo, hi) = match w.support() {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let term = |k: i32| -> f64 {
        let a = 2f64.powi(k - 1);
        let b = 2f64.powi(k);
        let block = w.block(a, b, q);
        let norm = if q.is_infinite() {
            block
        } else {
            block.powf(inv_q)
        };
        (2f64.powf(k as f64 * tau) * norm).powf(r)
    };
    let k_hi = hi.log2().ceil() as i32;
    let mut sum = 0.0;
    if lo > 0.0 {
        for k in (lo.log2().ceil() as i32)..=k_hi {
            sum += term(k);
        }
    } else {
        let first = w.segments[0];
        // Blocks (2^{k−1}, 2^k] with k <= k0 lie inside the first segment.
        let k0 = first.hi.log2().floor() as i32;
        for k in (k0 + 1)..=k_hi {
            sum += term(k);
        }
        let t0 = term(k0);
        let p = match first.shape {
            Shape::Constant { .. } => 0.0,
            Shape::Power { exponent, .. } => exponent,
        };
        let rho = r * (tau + p + inv_q);
        if t0 > 0.0 {
            if rho <= 0.0 || t0.is_infinite() {
                return Ok(f64::INFINITY);
            }
            sum += t0 / (1.0 - 2f64.powf(-rho));
        }
    }
    Ok(sum.powf(1.0 / r))
}

/// Which L^q small-ball statement the constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LqMode {
    /// `‖w X‖_{L^q}` for an index-`τ` process: `1/r = τ + 1/q`, rate `1/τ`.
    Process,
    /// `‖w I(X)‖_{L^q}` (integrated, restricted to the weight's support):
    /// `1/r = τ + 1 + 1/q`, rate `1/(τ+1)`.
    Integrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqConstant {
    /// The positive decay constant `κ ‖w‖_{L^r}^{rate}`.
    pub value: f64,
    pub r: f64,
    pub lr_norm: f64,
    pub block_norm: f64,
    /// `1/τ` or `1/(τ+1)`.
    pub rate: f64,
}

/// `κ(τ', q) · ‖w‖_{L^r}^{1/τ'}` with `τ' = τ` or `τ + 1` by mode, after
/// checking that the dyadic-block norm is finite.
pub fn lq_constant(mode: LqMode, tau: f64, q: f64, kappa: f64, w: &Weight) -> Result<LqConstant> {
    if !(q >= 1.0) {
        return Err(param(format!("q must be >= 1, got {q}")));
    }
    if mode == LqMode::Integrated && !(q > 1.0) {
        return Err(param("the integrated L^q statement needs q > 1"));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(param(format!("κ must be finite and >= 0, got {kappa}")));
    }
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let order = match mode {
        LqMode::Process => tau,
        LqMode::Integrated => tau + 1.0,
    };
    let r = 1.0 / (order + inv_q);
    let block_norm = w_norm(w, r, order, q)?;
    if !block_norm.is_finite() {
        return Err(param(format!("‖w‖_(r={r}, τ={order}, q={q}) is infinite")));
    }
    if mode == LqMode::Integrated {
        // ∫_0^t |w(s)| s^τ ds < ∞ near the origin.
        if let Some(first) = w.segments.first() {
            if first.lo == 0.0 {
                if let Shape::Power { coef, exponent } = first.shape {
                    if coef != 0.0 && exponent + tau <= -1.0 {
                        return Err(param("∫|w(s)| s^τ ds diverges at 0"));
                    }
                }
            }
        }
    }
    let lr = lr_norm(w, r)?;
    let rate = 1.0 / order;
    Ok(LqConstant {
        value: kappa * lr.powf(rate),
        r,
        lr_norm: lr,
        block_norm,
        rate,
    })
}
