//! Laws of the iterated logarithm checked in log-time.
//!
//! With `τ'` the self-similarity index, `U(s) = X(e^s) e^{−τ's}` is
//! stationary, so a horizon `T` costs `S = log T` time units of `U`. Every
//! statistic below is rewritten in terms of `U` on a uniform grid in `s`:
//!
//! * sup-LIL: `sup_{1≤t≤T} |X(t)/t^{τ'}| / √(2 log log T) = sup_{[0,S]} |U| / √(2 log S)`;
//! * Chung: `(log log T)^τ T^{α−τ} sup_{t≤T} |X(t)/t^{α−Σα}| = (log S)^τ sup_{s≤S} |U(s)| e^{−(τ−α)(S−s)}`;
//! * integral: `√(log log S / S) · sup_{[0,S]} |V|`, `V(s) = ∫_0^s U`.
//!
//! Liminf statistics are tracked as running minima over the horizon ladder.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::formulas::{
    a_h, integral_liminf_constant, kappa_known, lil_constant, KappaValue, StationaryCovariance,
};
use crate::grid::TimeGrid;
use crate::mc::map_paths;
use crate::paths::StationarySampler;
use crate::process::ProcessSpec;
use crate::rng::SeedSpec;
use crate::stats::{mean, median, normal_cdf, spearman, std_error};

pub const SCHEMA_VERSION: u32 = 1;

/// Default log-time grid spacing.
pub const DEFAULT_SPACING: f64 = 0.02;

/// Largest spacing accepted.
pub const MAX_SPACING: f64 = 0.05;

/// Log-time covered before `s = 0` (i.e. `t ∈ [e^{−2}, 1)`) for the Chung
/// statistic, whose sup runs over `[0, T]`; earlier times are damped by at
/// least `e^{−2(τ−α)}` relative to `t = 1`.
const PRE_WINDOW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    SupLil,
    ChungLiminf,
    IntegralLiminf,
}

/// Where the small-ball constant of the Chung statistic comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaSource {
    /// Known value or bracket of `κ_τ`.
    #[default]
    Known,
    /// A value supplied by the caller (e.g. from a small-ball fit).
    Estimated { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilExperiment {
    pub spec: ProcessSpec,
    pub theorem: Theorem,
    /// Horizons in log-time, `S = log T`, increasing.
    pub log_horizons: Vec<f64>,
    pub n_replicas: u64,
    pub seed: SeedSpec,
    pub spacing: f64,
    /// `α` of the Chung statistic.
    pub alpha: f64,
    pub kappa: KappaSource,
}

impl LilExperiment {
    pub fn new(spec: ProcessSpec, theorem: Theorem, n_replicas: u64, seed: SeedSpec) -> Self {
        Self {
            spec,
            theorem,
            log_horizons: default_horizons(theorem),
            n_replicas,
            seed,
            spacing: DEFAULT_SPACING,
            alpha: 0.0,
            kappa: KappaSource::Known,
        }
    }

    pub fn with_horizons(mut self, log_horizons: Vec<f64>) -> Self {
        self.log_horizons = log_horizons;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_kappa(mut self, kappa: KappaSource) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_replicas < 2 {
            return Err(param("need at least 2 replicas"));
        }
        if !(self.spacing > 0.0 && self.spacing <= MAX_SPACING) {
            return Err(param(format!(
                "log-time spacing must lie in (0, {MAX_SPACING}], got {}",
                self.spacing
            )));
        }
        let h = &self.log_horizons;
        if h.is_empty() || !h.iter().all(|s| s.is_finite()) {
            return Err(param("horizon list must be nonempty and finite"));
        }
        // log log S must be positive for the integral statistic, log S for the others.
        let floor = match self.theorem {
            Theorem::IntegralLiminf => std::f64::consts::E,
            _ => 1.0,
        };
        if h[0] <= floor {
            return Err(param(format!(
                "log-horizons must exceed {floor}, got {}",
                h[0]
            )));
        }
        if h.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("horizons must be strictly increasing"));
        }
        if self.theorem == Theorem::ChungLiminf {
            let tau = self.spec.small_ball_exponent();
            if !(self.alpha < tau) {
                return Err(param(format!(
                    "Chung statistic needs α < τ = {tau}, got {}",
                    self.alpha
                )));
            }
        }
        Ok(())
    }
}

/// Horizon ladders geometric in `S` with ratio `e`.
pub fn default_horizons(theorem: Theorem) -> Vec<f64> {
    match theorem {
        Theorem::SupLil => (1..=6).map(|k| f64::exp(k as f64)).collect(),
        Theorem::ChungLiminf => (1..=4).map(|k| f64::exp(k as f64)).collect(),
        Theorem::IntegralLiminf => {
            let mut v: Vec<f64> = (5..=9).map(|k| f64::exp(k as f64)).collect();
            v.push(1e4);
            v
        }
    }
}

/// Empirical `E V(S)² / S` against `σ̃²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGrowth {
    pub sigma_tilde2: f64,
    /// `mean_r V_r(S_k)² / S_k` per horizon, with standard errors.
    pub per_horizon: Vec<f64>,
    pub per_horizon_se: Vec<f64>,
    /// Same quantity from non-overlapping blocks of the longest path.
    pub block_length: f64,
    pub block_estimate: f64,
    pub block_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    pub schema_version: u32,
    pub experiment: LilExperiment,
    /// `U(0)` variance (`σ²` of the sup-LIL).
    pub variance: f64,
    pub theory_constant: f64,
    /// Interval for the constant when only a bracket of `κ` is known.
    pub theory_band: Option<[f64; 2]>,
    /// How `theory_constant` was computed.
    pub constant_source: String,
    /// `[replica][horizon]`: the tracked statistic (running minimum for the
    /// liminf theorems).
    pub statistic: Vec<Vec<f64>>,
    /// `[replica][horizon]`: the statistic at each horizon, before any minimum.
    pub raw: Vec<Vec<f64>>,
    pub median_statistic: Vec<f64>,
    pub median_ratio: Vec<f64>,
    /// Spearman correlation of the tracked statistic against horizon (pooled
    /// over replicas) and its two-sided p-value.
    pub trend_rho: f64,
    pub trend_p_value: f64,
    /// Spearman correlation of `−|ratio − 1|` against horizon, i.e. movement
    /// toward the constant from either side, with its one-sided p-value.
    pub convergence_rho: f64,
    pub convergence_p_value: f64,
    /// Running minima never increase (exact, liminf theorems only).
    pub running_min_nonincreasing: bool,
    pub variance_growth: Option<VarianceGrowth>,
    pub warnings: Vec<String>,
}

impl LilReport {
    /// Rows `horizon,replica,statistic,theory_constant,ratio`; `horizon` is `S = log T`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("horizon,replica,statistic,theory_constant,ratio\n");
        for (r, row) in self.statistic.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    self.experiment.log_horizons[k],
                    r,
                    v,
                    self.theory_constant,
                    v / self.theory_constant
                );
            }
        }
        s
    }

    pub fn final_median_ratio(&self) -> f64 {
        *self.median_ratio.last().expect("nonempty horizons")
    }
}

struct Theory {
    constant: f64,
    band: Option<[f64; 2]>,
    source: String,
}

fn theory(exp: &LilExperiment, cov: &StationaryCovariance) -> Result<Theory> {
    let spec = &exp.spec;
    Ok(match exp.theorem {
        Theorem::SupLil => Theory {
            constant: cov.variance()?.sqrt(),
            band: None,
            source: "sqrt(formulas::sigma2_general)".into(),
        },
        Theorem::IntegralLiminf => Theory {
            constant: integral_liminf_constant(cov.long_run_variance()?),
            band: None,
            source: "formulas::integral_liminf_constant(sigma_tilde2)".into(),
        },
        Theorem::ChungLiminf => {
            let tau = spec.small_ball_exponent();
            let (factor, factor_src) = match spec.hurst() {
                Some(h) => (a_h(h)?, "a_H · "),
                None => (1.0, ""),
            };
            let lil = |k: f64| lil_constant(tau, exp.alpha, k, factor);
            match exp.kappa {
                KappaSource::Estimated { kappa } => Theory {
                    constant: lil(kappa)?,
                    band: None,
                    source: format!("{factor_src}(κ̂/(1−α/τ))^τ, κ̂ = {kappa} supplied"),
                },
                KappaSource::Known => match kappa_known(tau) {
                    KappaValue::Exact { value } => Theory {
                        constant: lil(value)?,
                        band: None,
                        source: format!("{factor_src}(κ/(1−α/τ))^τ, formulas::kappa_known"),
                    },
                    KappaValue::Bounds { lo, hi } => Theory {
                        constant: lil((lo * hi).sqrt())?,
                        band: Some([lil(lo)?, lil(hi)?]),
                        source: format!(
                            "{factor_src}(κ/(1−α/τ))^τ over the known bracket of κ (geometric midpoint)"
                        ),
                    },
                    KappaValue::Unknown => {
                        return Err(param(format!(
                            "κ_{tau} is unknown; supply an estimated value for the Chung statistic"
                        )))
                    }
                },
            }
        }
    })
}

/// Per-replica output of one stationary path.
struct ReplicaStats {
    raw: Vec<f64>,
    v_at: Vec<f64>,
    blocks: Vec<f64>,
}

/// Shared machinery: one stationary path per replica on `[−pre, S_max]`.
fn simulate(exp: &LilExperiment) -> Result<(LilReport, Vec<ReplicaStats>)> {
    exp.validate()?;
    let cov = StationaryCovariance::new(&exp.spec)?;
    let th = theory(exp, &cov)?;
    let pre = if exp.theorem == Theorem::ChungLiminf {
        PRE_WINDOW
    } else {
        0.0
    };
    let h = exp.spacing;
    let s_max = *exp.log_horizons.last().expect("validated");
    let n = ((s_max + pre) / h).ceil() as usize;
    let grid = Arc::new(TimeGrid::uniform(0.0, n as f64 * h, n)?);
    let table = cov.tabulate(h, StationarySampler::table_len(n + 1))?;
    let sampler = StationarySampler::from_table(&table, grid)?;
    let offset = (pre / h).round() as usize;
    // Last node at or before each horizon.
    let idx: Vec<usize> = exp
        .log_horizons
        .iter()
        .map(|&s| offset + ((s / h) + 1e-9).floor() as usize)
        .collect();
    let tau = exp.spec.small_ball_exponent();
    let decay = tau - exp.alpha;
    let theorem = exp.theorem;
    let block_len = (s_max / 100.0 / h).floor().max(1.0) as usize;

    let stats = map_paths(&sampler, &exp.seed, 0..exp.n_replicas, |_, u| {
        let mut raw = Vec::with_capacity(idx.len());
        let mut v_at = Vec::new();
        let mut blocks = Vec::new();
        match theorem {
            Theorem::SupLil => {
                let mut m = 0.0f64;
                let mut j = offset;
                for (&k, &s) in idx.iter().zip(&exp.log_horizons) {
                    while j <= k {
                        m = m.max(u[j].abs());
                        j += 1;
                    }
                    raw.push(m / (2.0 * s.ln()).sqrt());
                }
            }
            Theorem::ChungLiminf => {
                // sup_{s≤S} |U(s)| e^{−d(S−s)} by the recursion M_j = max(|U_j|, M_{j−1} e^{−d h}).
                let damp = (-decay * h).exp();
                let mut m = 0.0f64;
                let mut j = 0;
                for (&k, &s) in idx.iter().zip(&exp.log_horizons) {
                    while j <= k {
                        m = (m * damp).max(u[j].abs());
                        j += 1;
                    }
                    raw.push(s.ln().powf(tau) * m);
                }
            }
            Theorem::IntegralLiminf => {
                let mut v = 0.0;
                let mut m = 0.0f64;
                let mut j = offset;
                let mut block_start = 0.0;
                for (&k, &s) in idx.iter().zip(&exp.log_horizons) {
                    while j < k {
                        v += 0.5 * h * (u[j] + u[j + 1]);
                        m = m.max(v.abs());
                        j += 1;
                        if (j - offset) % block_len == 0 {
                            blocks.push(v - block_start);
                            block_start = v;
                        }
                    }
                    raw.push((s.ln().ln() / s).sqrt() * m);
                    v_at.push(v);
                }
            }
        }
        ReplicaStats { raw, v_at, blocks }
    });

    let variance = cov.variance()?;
    let mut report = LilReport {
        schema_version: SCHEMA_VERSION,
        experiment: exp.clone(),
        variance,
        theory_constant: th.constant,
        theory_band: th.band,
        constant_source: th.source,
        statistic: vec![],
        raw: stats.iter().map(|s| s.raw.clone()).collect(),
        median_statistic: vec![],
        median_ratio: vec![],
        trend_rho: f64::NAN,
        trend_p_value: f64::NAN,
        convergence_rho: f64::NAN,
        convergence_p_value: f64::NAN,
        running_min_nonincreasing: true,
        variance_growth: None,
        warnings: vec![],
    };
    if theorem == Theorem::IntegralLiminf {
        let lrv = cov.long_run_variance()?;
        let mut per = vec![];
        let mut per_se = vec![];
        for (k, &s) in exp.log_horizons.iter().enumerate() {
            let sq: Vec<f64> = stats.iter().map(|r| r.v_at[k] * r.v_at[k] / s).collect();
            per.push(mean(&sq));
            per_se.push(std_error(&sq));
        }
        let bl = block_len as f64 * h;
        let sq: Vec<f64> = stats
            .iter()
            .flat_map(|r| r.blocks.iter().map(|b| b * b / bl))
            .collect();
        report.variance_growth = Some(VarianceGrowth {
            sigma_tilde2: lrv,
            per_horizon: per,
            per_horizon_se: per_se,
            block_length: bl,
            block_estimate: mean(&sq),
            block_se: std_error(&sq),
        });
    }
    Ok((report, stats))
}

fn finish(mut report: LilReport, running_min: bool) -> LilReport {
    report.statistic = report
        .raw
        .iter()
        .map(|row| {
            if running_min {
                row.iter()
                    .scan(f64::INFINITY, |m, &x| {
                        *m = m.min(x);
                        Some(*m)
                    })
                    .collect()
            } else {
                row.clone()
            }
        })
        .collect();
    let n_h = report.experiment.log_horizons.len();
    report.median_statistic = (0..n_h)
        .map(|k| median(&report.statistic.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect();
    report.median_ratio = report
        .median_statistic
        .iter()
        .map(|m| m / report.theory_constant)
        .collect();
    report.running_min_nonincreasing = report
        .statistic
        .iter()
        .all(|r| r.windows(2).all(|w| w[1] <= w[0]));
    if n_h > 1 {
        let c = report.theory_constant;
        let xs: Vec<f64> = report
            .statistic
            .iter()
            .flat_map(|r| (0..r.len()).map(|k| k as f64))
            .collect();
        let ys: Vec<f64> = report.statistic.iter().flatten().copied().collect();
        let dev: Vec<f64> = ys.iter().map(|v| -(v / c - 1.0).abs()).collect();
        // Large-sample null distribution: ρ √(n−1) ≈ N(0, 1).
        let z = ((xs.len() - 1) as f64).sqrt();
        report.trend_rho = spearman(&xs, &ys);
        report.trend_p_value = 2.0 * (1.0 - normal_cdf((report.trend_rho * z).abs()));
        report.convergence_rho = spearman(&xs, &dev);
        report.convergence_p_value = 1.0 - normal_cdf(report.convergence_rho * z);
    }
    if report.statistic.iter().flatten().any(|v| !v.is_finite()) {
        report.warnings.push("non-finite statistic".into());
    }
    if let Some([lo, hi]) = report.theory_band {
        let m = *report.median_statistic.last().expect("nonempty");
        if !(lo <= m && m <= hi) {
            report.warnings.push(format!(
                "final median {m:.4} outside the theoretical band [{lo:.4}, {hi:.4}]"
            ));
        }
    }
    report
}

fn expect(exp: &LilExperiment, theorem: Theorem) -> Result<()> {
    if exp.theorem != theorem {
        return Err(param(format!(
            "experiment is {:?}, expected {theorem:?}",
            exp.theorem
        )));
    }
    Ok(())
}

/// `sup_{1≤t≤T} |X(t)/t^{τ'}| / √(2 log log T)` against `σ`.
pub fn run_sup_lil(exp: &LilExperiment) -> Result<LilReport> {
    expect(exp, Theorem::SupLil)?;
    let (report, _) = simulate(exp)?;
    Ok(finish(report, false))
}

/// Chung statistic, running minimum over horizons, against
/// `factor · (κ/(1−α/τ))^τ`.
pub fn run_chung_liminf(exp: &LilExperiment) -> Result<LilReport> {
    expect(exp, Theorem::ChungLiminf)?;
    let (report, _) = simulate(exp)?;
    Ok(finish(report, true))
}

/// Integral statistic, running minimum over horizons, against `π/√8 · σ̃`.
pub fn run_integral_liminf(exp: &LilExperiment) -> Result<LilReport> {
    expect(exp, Theorem::IntegralLiminf)?;
    let (report, _) = simulate(exp)?;
    Ok(finish(report, true))
}

/// Dispatch on `exp.theorem`.
pub fn run(exp: &LilExperiment) -> Result<LilReport> {
    match exp.theorem {
        Theorem::SupLil => run_sup_lil(exp),
        Theorem::ChungLiminf => run_chung_liminf(exp),
        Theorem::IntegralLiminf => run_integral_liminf(exp),
    }
}

/// Stationary samples of `U` on `[0, S]` (for diagnostics).
pub fn sample_stationary(
    spec: &ProcessSpec,
    s: f64,
    spacing: f64,
    seed: &SeedSpec,
    n_paths: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(spacing > 0.0 && spacing <= MAX_SPACING) {
        return Err(param(format!(
            "spacing must lie in (0, {MAX_SPACING}], got {spacing}"
        )));
    }
    let cov = StationaryCovariance::new(spec)?;
    let n = (s / spacing).ceil().max(1.0) as usize;
    let grid = Arc::new(TimeGrid::uniform(0.0, n as f64 * spacing, n)?);
    let table = cov.tabulate(spacing, StationarySampler::table_len(n + 1))?;
    let sampler = StationarySampler::from_table(&table, grid)?;
    Ok(map_paths(&sampler, seed, 0..n_paths, |_, u| u.to_vec()))
}
