//! Randomized play-the-winner urn: exact simulation, the constants of its
//! Gaussian approximation, and LIL / Chung diagnostics.
//!
//! Stage `i` draws white with probability `Y/(W0 + B0 + i − 1)`. A white
//! draw adds a white ball with probability `p_W` (else black); a black draw
//! adds a black ball with probability `p_B` (else white). `N` counts white
//! draws. Each stage consumes exactly two uniforms, draw then addition.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng::SeedSpec;
use crate::stats::{mean, median, std_error, variance};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnParams {
    pub p_w: f64,
    pub p_b: f64,
    pub w0: f64,
    pub b0: f64,
}

impl UrnParams {
    pub fn new(p_w: f64, p_b: f64, w0: f64, b0: f64) -> Result<Self> {
        let p = Self { p_w, p_b, w0, b0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_W", self.p_w), ("p_B", self.p_b)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(param(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [("W0", self.w0), ("B0", self.b0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(param(format!("{name} must be a positive real, got {v}")));
            }
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.p_w + self.p_b - 1.0
    }
}

/// Constants of the Gaussian approximation and the limit theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpwConstants {
    pub rho: f64,
    pub v: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// `σ₁²/(1 − 2ρ)`: asymptotic `Var(Y_n − nv)/n`.
    pub y_variance: f64,
    /// `σ₁/√(1 − 2ρ)`: limsup of `|Y_n − nv|/√(2n log log n)`.
    pub lil_y: f64,
    /// `√(σ₁²(1 + 2(p_W + p_B))/(1 − 2ρ))`: the same for `N_n`.
    pub lil_n: f64,
    /// `σ₁π/√8`: Chung liminf for both `Y` and `N`.
    pub chung: f64,
}

/// `ρ`, `v`, `σ₁²`, `σ₂²` and the limit constants. The LIL constants need
/// `ρ < ½` and are NaN otherwise.
pub fn rpw_params(p: &UrnParams) -> Result<RpwConstants> {
    p.validate()?;
    let (q_w, q_b) = (1.0 - p.p_w, 1.0 - p.p_b);
    let s = q_w + q_b;
    let rho = p.rho();
    let sigma1_sq = q_w * q_b / (s * s);
    let sigma2_sq = q_w * q_b * (p.p_w + p.p_b) / s;
    let mix = 1.0 - 2.0 * rho;
    let (y_variance, lil_y, lil_n) = if mix > 0.0 {
        (
            sigma1_sq / mix,
            (sigma1_sq / mix).sqrt(),
            (sigma1_sq * (1.0 + 2.0 * (p.p_w + p.p_b)) / mix).sqrt(),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(RpwConstants {
        rho,
        v: q_b / s,
        sigma1_sq,
        sigma2_sq,
        y_variance,
        lil_y,
        lil_n,
        chung: sigma1_sq.sqrt() * std::f64::consts::PI / 8f64.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnTrajectory {
    pub params: UrnParams,
    /// `Y_0 = W0, …, Y_n`.
    pub y: Vec<f64>,
    /// `N_0 = 0, …, N_n`.
    pub n: Vec<u64>,
}

impl UrnTrajectory {
    pub fn stages(&self) -> usize {
        self.n.len() - 1
    }

    pub fn total_balls(&self, stage: usize) -> f64 {
        self.params.w0 + self.params.b0 + stage as f64
    }
}

/// One urn stage: returns (white drawn, white added).
#[inline]
fn step<R: Rng>(rng: &mut R, p: &UrnParams, y: f64, total: f64) -> (bool, bool) {
    let u_draw: f64 = rng.random();
    let u_add: f64 = rng.random();
    let white = u_draw * total < y;
    let add_white = if white { u_add < p.p_w } else { u_add >= p.p_b };
    (white, add_white)
}

/// Full trajectory of replica `replica`.
pub fn simulate(p: &UrnParams, n: usize, seed: &SeedSpec, replica: u64) -> Result<UrnTrajectory> {
    p.validate()?;
    let mut rng = seed.rng(replica);
    let mut y = Vec::with_capacity(n + 1);
    let mut draws = Vec::with_capacity(n + 1);
    let (mut yc, mut nc) = (p.w0, 0u64);
    y.push(yc);
    draws.push(nc);
    for i in 0..n {
        let (white, add) = step(&mut rng, p, yc, p.w0 + p.b0 + i as f64);
        nc += white as u64;
        yc += add as u8 as f64;
        y.push(yc);
        draws.push(nc);
    }
    Ok(UrnTrajectory {
        params: *p,
        y,
        n: draws,
    })
}

/// State of one replica at the checkpoints, with running sups of
/// `|Y_m − mv|` and `|N_m − mv|` over all `m` up to each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub y: Vec<f64>,
    pub n: Vec<u64>,
    pub sup_dev_y: Vec<f64>,
    pub sup_dev_n: Vec<f64>,
}

/// Same dynamics (and random numbers) as [`simulate`], keeping only the
/// checkpoints: memory is `O(#checkpoints)`.
pub fn simulate_checkpoints(
    p: &UrnParams,
    checkpoints: &[u64],
    seed: &SeedSpec,
    replica: u64,
) -> Result<CheckpointRecord> {
    p.validate()?;
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("checkpoints must be strictly increasing"));
    }
    let v = rpw_params(p)?.v;
    let mut rng = seed.rng(replica);
    let mut rec = CheckpointRecord {
        y: Vec::with_capacity(checkpoints.len()),
        n: Vec::with_capacity(checkpoints.len()),
        sup_dev_y: Vec::with_capacity(checkpoints.len()),
        sup_dev_n: Vec::with_capacity(checkpoints.len()),
    };
    let (mut yc, mut nc) = (p.w0, 0u64);
    let (mut sy, mut sn) = (0.0f64, 0.0f64);
    let mut stage = 0u64;
    for &cp in checkpoints {
        while stage < cp {
            let (white, add) = step(&mut rng, p, yc, p.w0 + p.b0 + stage as f64);
            nc += white as u64;
            yc += add as u8 as f64;
            stage += 1;
            let mv = stage as f64 * v;
            sy = sy.max((yc - mv).abs());
            sn = sn.max((nc as f64 - mv).abs());
        }
        rec.y.push(yc);
        rec.n.push(nc);
        rec.sup_dev_y.push(sy);
        rec.sup_dev_n.push(sn);
    }
    Ok(rec)
}

/// Dyadic checkpoints `2^10, …, 2^20`, plus `10⁶`.
pub fn default_checkpoints() -> Vec<u64> {
    let mut v: Vec<u64> = (10..=20).map(|k| 1u64 << k).collect();
    v.push(1_000_000);
    v.sort_unstable();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnReport {
    pub schema_version: u32,
    pub params: UrnParams,
    pub constants: RpwConstants,
    pub seed: SeedSpec,
    pub n_replicas: u64,
    pub checkpoints: Vec<u64>,
    /// `[replica]` records.
    pub replicas: Vec<CheckpointRecord>,
    /// Per checkpoint: mean of `Y_n/n` over replicas and its standard error.
    pub mean_y_over_n: Vec<f64>,
    pub se_y_over_n: Vec<f64>,
    /// Per checkpoint: sample `Var(Y_n − nv)/n` over the asymptotic value.
    pub variance_ratio: Vec<f64>,
    /// `[replica][checkpoint]`: running max of `(Y_m − mv)/√(2m log log m)`.
    pub lil_y: Vec<Vec<f64>>,
    pub lil_n: Vec<Vec<f64>>,
    /// `[replica][checkpoint]`: running min of `√(log log n/n) sup_{m≤n}|Y_m − mv|`.
    pub chung_y: Vec<Vec<f64>>,
    pub chung_n: Vec<Vec<f64>>,
    /// Final-checkpoint medians over the theory constants.
    pub median_lil_y_ratio: f64,
    pub median_lil_n_ratio: f64,
    pub median_chung_y_ratio: f64,
    pub median_chung_n_ratio: f64,
    pub warnings: Vec<String>,
}

impl UrnReport {
    /// Rows `n,replica,Y,N` at every checkpoint.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,replica,Y,N\n");
        for (r, rec) in self.replicas.iter().enumerate() {
            for (k, &cp) in self.checkpoints.iter().enumerate() {
                let _ = writeln!(s, "{cp},{r},{},{}", rec.y[k], rec.n[k]);
            }
        }
        s
    }
}

fn running(values: impl Iterator<Item = f64>, max: bool) -> Vec<f64> {
    let init = if max {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    values
        .scan(init, |acc, x| {
            *acc = if max { acc.max(x) } else { acc.min(x) };
            Some(*acc)
        })
        .collect()
}

/// Simulate `n_replicas` urns to the last checkpoint and compute the LIL
/// and Chung statistics at each checkpoint.
pub fn lil_diagnostics(
    p: &UrnParams,
    n_replicas: u64,
    checkpoints: &[u64],
    seed: &SeedSpec,
) -> Result<UrnReport> {
    let c = rpw_params(p)?;
    if !(c.rho < 0.5) {
        return Err(param(format!(
            "LIL diagnostics need ρ < ½, got ρ = {}",
            c.rho
        )));
    }
    if n_replicas < 2 {
        return Err(param("need at least 2 replicas"));
    }
    if checkpoints.first().map_or(true, |&n| n < 16) {
        return Err(param("checkpoints must start at n >= 16 (log log n > 0)"));
    }
    let replicas: Vec<CheckpointRecord> = (0..n_replicas)
        .into_par_iter()
        .map(|r| simulate_checkpoints(p, checkpoints, seed, r))
        .collect::<Result<_>>()?;
    let v = c.v;
    let cps: Vec<f64> = checkpoints.iter().map(|&n| n as f64).collect();
    let lil_norm: Vec<f64> = cps.iter().map(|n| (2.0 * n * n.ln().ln()).sqrt()).collect();
    let chung_norm: Vec<f64> = cps.iter().map(|n| (n.ln().ln() / n).sqrt()).collect();
    let per_rep = |f: &dyn Fn(&CheckpointRecord, usize) -> f64, max: bool| -> Vec<Vec<f64>> {
        replicas
            .iter()
            .map(|rec| running((0..cps.len()).map(|k| f(rec, k)), max))
            .collect()
    };
    let lil_y = per_rep(&|r, k| (r.y[k] - cps[k] * v).abs() / lil_norm[k], true);
    let lil_n = per_rep(
        &|r, k| (r.n[k] as f64 - cps[k] * v).abs() / lil_norm[k],
        true,
    );
    let chung_y = per_rep(&|r, k| r.sup_dev_y[k] * chung_norm[k], false);
    let chung_n = per_rep(&|r, k| r.sup_dev_n[k] * chung_norm[k], false);

    let mut mean_y = vec![];
    let mut se_y = vec![];
    let mut var_ratio = vec![];
    for (k, &n) in cps.iter().enumerate() {
        let frac: Vec<f64> = replicas.iter().map(|r| r.y[k] / n).collect();
        mean_y.push(mean(&frac));
        se_y.push(std_error(&frac));
        let dev: Vec<f64> = replicas
            .iter()
            .map(|r| (r.y[k] - n * v) / n.sqrt())
            .collect();
        var_ratio.push(variance(&dev) / c.y_variance);
    }
    let last = cps.len() - 1;
    let final_median = |m: &[Vec<f64>], target: f64| {
        median(&m.iter().map(|r| r[last]).collect::<Vec<_>>()) / target
    };
    let mut warnings = vec![];
    if c.rho > 0.2 {
        warnings.push(format!(
            "ρ = {:.3} > 0.2: mixing is slow and the variance band is not expected to hold at n ≈ 10⁶",
            c.rho
        ));
    }
    Ok(UrnReport {
        schema_version: SCHEMA_VERSION,
        params: *p,
        constants: c,
        seed: *seed,
        n_replicas,
        checkpoints: checkpoints.to_vec(),
        median_lil_y_ratio: final_median(&lil_y, c.lil_y),
        median_lil_n_ratio: final_median(&lil_n, c.lil_n),
        median_chung_y_ratio: final_median(&chung_y, c.chung),
        median_chung_n_ratio: final_median(&chung_n, c.chung),
        replicas,
        mean_y_over_n: mean_y,
        se_y_over_n: se_y,
        variance_ratio: var_ratio,
        lil_y,
        lil_n,
        chung_y,
        chung_n,
        warnings,
    })
}
