//! Which Gaussian process to build.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// The Gaussian base process before any weighted integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseProcess {
    /// Fractional Brownian motion `B_H`.
    Fbm { hurst: f64 },
    /// Riemann–Liouville process `W_λ`.
    Rl { lambda: f64 },
    /// Riemann–Liouville fractional integral of order `γ` of `B_H`.
    FbmFrac { hurst: f64, gamma: f64 },
}

/// `J_{m,ᾱ}` applied to a base process, `ᾱ = weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub base: BaseProcess,
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl ProcessSpec {
    pub fn new(base: BaseProcess, weights: Vec<f64>) -> Result<Self> {
        let s = Self { base, weights };
        s.validate()?;
        Ok(s)
    }

    pub fn brownian() -> Self {
        Self {
            base: BaseProcess::Fbm { hurst: 0.5 },
            weights: vec![],
        }
    }

    pub fn fbm(hurst: f64) -> Result<Self> {
        Self::new(BaseProcess::Fbm { hurst }, vec![])
    }

    pub fn rl(lambda: f64) -> Result<Self> {
        Self::new(BaseProcess::Rl { lambda }, vec![])
    }

    pub fn fbm_frac(hurst: f64, gamma: f64) -> Result<Self> {
        Self::new(BaseProcess::FbmFrac { hurst, gamma }, vec![])
    }

    /// `∫_0^t B(s) ds`.
    pub fn integrated_brownian() -> Self {
        Self {
            base: BaseProcess::Fbm { hurst: 0.5 },
            weights: vec![0.0],
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.base {
            BaseProcess::Fbm { hurst } | BaseProcess::FbmFrac { hurst, .. } => Some(hurst),
            BaseProcess::Rl { .. } => None,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self.base {
            BaseProcess::FbmFrac { gamma, .. } => gamma,
            _ => 0.0,
        }
    }

    /// `H + γ` on the fBm branch, `λ` on the Riemann–Liouville branch.
    pub fn base_index(&self) -> f64 {
        match self.base {
            BaseProcess::Fbm { hurst } => hurst,
            BaseProcess::FbmFrac { hurst, gamma } => hurst + gamma,
            BaseProcess::Rl { lambda } => lambda,
        }
    }

    /// Self-similarity index after each weighted integration:
    /// `τ_i = τ_base + i − (α_1 + … + α_i)`, `i = 0..=m`.
    pub fn stage_indices(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m() + 1);
        let mut tau = self.base_index();
        out.push(tau);
        for a in &self.weights {
            tau += 1.0 - a;
            out.push(tau);
        }
        out
    }

    /// `τ_base + m − Σα_i`.
    pub fn self_similarity_index(&self) -> f64 {
        self.base_index() + self.m() as f64 - self.weights.iter().sum::<f64>()
    }

    /// `τ_base + m`: the exponent governing small-ball rates and the Chung LIL.
    pub fn small_ball_exponent(&self) -> f64 {
        self.base_index() + self.m() as f64
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True for standard Brownian motion (no weighted integrals).
    pub fn is_brownian(&self) -> bool {
        self.weights.is_empty()
            && match self.base {
                BaseProcess::Fbm { hurst } => hurst == 0.5,
                BaseProcess::FbmFrac { hurst, gamma } => hurst == 0.5 && gamma == 0.0,
                BaseProcess::Rl { lambda } => lambda == 0.5,
            }
    }

    pub fn validate(&self) -> Result<()> {
        match self.base {
            BaseProcess::Fbm { hurst } => check_hurst(hurst)?,
            BaseProcess::FbmFrac { hurst, gamma } => {
                check_hurst(hurst)?;
                if !(gamma >= 0.0) || !gamma.is_finite() {
                    return Err(param(format!("γ must be finite and >= 0, got {gamma}")));
                }
            }
            BaseProcess::Rl { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(param(format!("λ must be finite and > 0, got {lambda}")));
                }
            }
        }
        if let Some(a) = self.weights.iter().find(|a| !a.is_finite()) {
            return Err(param(format!("weight exponent {a} is not finite")));
        }
        check_admissible(self.base_index(), &self.weights)
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(param(format!("Hurst index must lie in (0, 1), got {h}")))
    }
}

/// `α_1 + … + α_i < τ_base + i` for every stage.
pub fn check_admissible(base_index: f64, weights: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, a) in weights.iter().enumerate() {
        sum += a;
        let stage = i + 1;
        if !(sum < base_index + stage as f64) {
            return Err(Error::Admissibility {
                stage,
                detail: format!(
                    "α_1+…+α_{stage} = {sum} must be < {} (base index {base_index} + {stage})",
                    base_index + stage as f64
                ),
            });
        }
    }
    Ok(())
}
