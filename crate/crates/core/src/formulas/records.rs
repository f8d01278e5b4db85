use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::constants::*;
use super::covariance::{r_lambda, StationaryCovariance};
use super::weights::{lq_constant, lr_norm, w_norm, LqMode, Weight};
use crate::error::Result;
use crate::process::{BaseProcess, ProcessSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// One constant to evaluate, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "snake_case")]
pub enum ConstantRequest {
    AH {
        hurst: f64,
    },
    Sigma2W {
        lambda: f64,
    },
    Sigma2B0 {
        hurst: f64,
        gamma: f64,
    },
    Sigma2General {
        spec: ProcessSpec,
    },
    RLambda {
        lambda: f64,
        h: f64,
    },
    RRec {
        spec: ProcessSpec,
        h: f64,
    },
    SigmaTilde2B {
        hurst: f64,
        gamma: f64,
        weights: Vec<f64>,
    },
    SigmaTilde2W {
        lambda: f64,
        weights: Vec<f64>,
    },
    ChungConstant {
        tau: f64,
        alpha: f64,
        kappa: f64,
    },
    LilConstant {
        tau: f64,
        alpha: f64,
        kappa: f64,
        factor: f64,
    },
    KappaKnown {
        lambda: f64,
        q: f64,
    },
    LqConstant {
        mode: LqMode,
        tau: f64,
        q: f64,
        kappa: f64,
        weight: Weight,
    },
    WNorm {
        weight: Weight,
        r: f64,
        tau: f64,
        q: f64,
    },
}

/// A point value, an interval, or nothing known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantValue {
    Point(f64),
    Interval([f64; 2]),
    Unknown(Option<()>),
}

/// Exported form of an evaluated constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRecord {
    pub schema_version: u32,
    pub name: String,
    pub parameters: Map<String, Value>,
    pub value: ConstantValue,
    pub tolerance: f64,
    pub method: String,
}

impl ConstantRecord {
    pub fn point(&self) -> Option<f64> {
        match self.value {
            ConstantValue::Point(v) => Some(v),
            _ => None,
        }
    }
}

impl ConstantRequest {
    pub fn name(&self) -> &'static str {
        match self {
            ConstantRequest::AH { .. } => "a_H",
            ConstantRequest::Sigma2W { .. } => "sigma2_W",
            ConstantRequest::Sigma2B0 { .. } => "sigma2_B0",
            ConstantRequest::Sigma2General { .. } => "sigma2_general",
            ConstantRequest::RLambda { .. } => "r_lambda",
            ConstantRequest::RRec { .. } => "r_rec",
            ConstantRequest::SigmaTilde2B { .. } => "sigma_tilde2_B",
            ConstantRequest::SigmaTilde2W { .. } => "sigma_tilde2_W",
            ConstantRequest::ChungConstant { .. } => "chung_constant",
            ConstantRequest::LilConstant { .. } => "lil_constant",
            ConstantRequest::KappaKnown { .. } => "kappa_known",
            ConstantRequest::LqConstant { .. } => "lq_constant",
            ConstantRequest::WNorm { .. } => "w_norm",
        }
    }

    pub fn evaluate(&self) -> Result<ConstantRecord> {
        let point = |v: f64, tolerance: f64, method: &str| {
            (ConstantValue::Point(v), tolerance, method.to_string())
        };
        let (value, tolerance, method) = match self {
            ConstantRequest::AH { hurst } => point(a_h(*hurst)?, 1e-10, "tanh-sinh quadrature"),
            ConstantRequest::Sigma2W { lambda } => point(sigma2_w(*lambda)?, 0.0, "closed form"),
            ConstantRequest::Sigma2B0 { hurst, gamma } => point(
                sigma2_b0(*hurst, *gamma)?,
                1e-9,
                "nested tanh-sinh quadrature",
            ),
            ConstantRequest::Sigma2General { spec } => {
                let cov = StationaryCovariance::new(spec)?;
                let method = if spec.m() == 0 {
                    "closed form / base quadrature"
                } else {
                    "nested adaptive quadrature"
                };
                point(cov.variance()?, 1e-9, method)
            }
            ConstantRequest::RLambda { lambda, h } => {
                point(r_lambda(*lambda, *h)?, 1e-11, "tanh-sinh quadrature")
            }
            ConstantRequest::RRec { spec, h } => point(
                StationaryCovariance::new(spec)?.eval(*h)?,
                1e-9,
                "nested adaptive quadrature",
            ),
            ConstantRequest::SigmaTilde2B {
                hurst,
                gamma,
                weights,
            } => point(sigma_tilde2_b(*hurst, *gamma, weights)?, 0.0, "closed form"),
            ConstantRequest::SigmaTilde2W { lambda, weights } => {
                point(sigma_tilde2_w(*lambda, weights)?, 0.0, "closed form")
            }
            ConstantRequest::ChungConstant { tau, alpha, kappa } => {
                point(chung_constant(*tau, *alpha, *kappa)?, 0.0, "closed form")
            }
            ConstantRequest::LilConstant {
                tau,
                alpha,
                kappa,
                factor,
            } => point(
                lil_constant(*tau, *alpha, *kappa, *factor)?,
                0.0,
                "closed form",
            ),
            ConstantRequest::KappaKnown { lambda, q } => match kappa_lq_known(*lambda, *q) {
                KappaValue::Exact { value } => point(value, 0.0, "known value"),
                KappaValue::Bounds { lo, hi } => (
                    ConstantValue::Interval([lo, hi]),
                    0.0,
                    "known bounds".into(),
                ),
                KappaValue::Unknown => (ConstantValue::Unknown(None), 0.0, "unknown".into()),
            },
            ConstantRequest::LqConstant {
                mode,
                tau,
                q,
                kappa,
                weight,
            } => point(
                lq_constant(*mode, *tau, *q, *kappa, weight)?.value,
                1e-12,
                "closed form block norms",
            ),
            ConstantRequest::WNorm { weight, r, tau, q } => point(
                w_norm(weight, *r, *tau, *q)?,
                1e-12,
                "dyadic blocks, geometric tail in closed form",
            ),
        };
        Ok(ConstantRecord {
            schema_version: SCHEMA_VERSION,
            name: self.name().to_string(),
            parameters: self.parameters(),
            value,
            tolerance,
            method,
        })
    }

    fn parameters(&self) -> Map<String, Value> {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        match v.as_object_mut() {
            Some(map) => {
                map.remove("which");
                if let ConstantRequest::WNorm { weight, r, .. } = self {
                    if let Ok(n) = lr_norm(weight, *r) {
                        map.insert("lr_norm".into(), json!(n));
                    }
                }
                map.clone()
            }
            None => Map::new(),
        }
    }
}

/// `ProcessSpec` from the flat parameter set used by the CLI.
pub fn spec_from_parts(
    hurst: Option<f64>,
    lambda: Option<f64>,
    gamma: f64,
    weights: Vec<f64>,
) -> Result<ProcessSpec> {
    let base = match (hurst, lambda) {
        (_, Some(lambda)) => BaseProcess::Rl { lambda },
        (Some(hurst), None) if gamma == 0.0 => BaseProcess::Fbm { hurst },
        (Some(hurst), None) => BaseProcess::FbmFrac { hurst, gamma },
        (None, None) => BaseProcess::Fbm { hurst: 0.5 },
    };
    ProcessSpec::new(base, weights)
}
