//! Monte Carlo small-ball probabilities `P(‖X‖ < ε)` and regression
//! estimates of the decay constant `κ` in `−log P ≈ κ ε^{−1/τ}`.
//!
//! Every estimate is computed on a fine grid and, on the same paths, on the
//! grid with every other point dropped; the difference is reported as the
//! refinement gap. All ε of a ladder (and all norms of a comparison) are
//! evaluated on one set of paths.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::formulas::{a_h, bridge_survival, kappa_lq_known, lr_norm, KappaValue, LqMode, Weight};
use crate::grid::TimeGrid;
use crate::mc::map_paths;
use crate::paths::ProcessSampler;
use crate::process::ProcessSpec;
use crate::rng::SeedSpec;
use crate::stats::{least_squares, quantile, wilson_interval};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest probability accepted without `allow_rare`.
pub const RARE_THRESHOLD: f64 = 1e-4;

const CHUNK: u64 = 1 << 15;
const PILOT_TAG: u64 = 0x9170_7a11;

/// The functional whose small-ball probability is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    /// `sup_{t∈[a,b]} |X(t) / t^{α − Σα_i}|`.
    WeightedSup { alpha: f64, interval: [f64; 2] },
    /// `‖w(t) t^{Σα_i} X(t)‖_{L^q(a,b)}`.
    Lq {
        q: f64,
        weight: Weight,
        interval: [f64; 2],
    },
    /// `‖∫_0^t w(s) s^{Σα_i} X(s) ds‖_{L^q(a,b)}`.
    IntegratedLq {
        q: f64,
        weight: Weight,
        interval: [f64; 2],
    },
}

impl NormSpec {
    /// Plain sup-norm on `[0, 1]`.
    pub fn sup() -> Self {
        Self::weighted_sup(0.0)
    }

    pub fn weighted_sup(alpha: f64) -> Self {
        NormSpec::WeightedSup {
            alpha,
            interval: [0.0, 1.0],
        }
    }

    /// `L^q` norm over the support of `weight`.
    pub fn lq(q: f64, weight: Weight) -> Result<Self> {
        let interval = support_interval(&weight)?;
        Ok(NormSpec::Lq {
            q,
            weight,
            interval,
        })
    }

    /// Integrated `L^q` norm over the support of `weight`.
    pub fn integrated_lq(q: f64, weight: Weight) -> Result<Self> {
        let interval = support_interval(&weight)?;
        Ok(NormSpec::IntegratedLq {
            q,
            weight,
            interval,
        })
    }

    pub fn interval(&self) -> [f64; 2] {
        match self {
            NormSpec::WeightedSup { interval, .. }
            | NormSpec::Lq { interval, .. }
            | NormSpec::IntegratedLq { interval, .. } => *interval,
        }
    }

    /// `τ` in `−log P ≈ κ ε^{−1/τ}`.
    pub fn exponent(&self, spec: &ProcessSpec) -> f64 {
        match self {
            NormSpec::IntegratedLq { .. } => spec.small_ball_exponent() + 1.0,
            _ => spec.small_ball_exponent(),
        }
    }

    pub fn validate(&self, spec: &ProcessSpec) -> Result<()> {
        spec.validate()?;
        let [a, b] = self.interval();
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(param(format!(
                "norm interval [{a}, {b}] must satisfy 0 <= a < b < ∞"
            )));
        }
        match self {
            NormSpec::WeightedSup { alpha, .. } => {
                let tau = spec.small_ball_exponent();
                if a == 0.0 && !(*alpha < tau) {
                    return Err(param(format!(
                        "weighted sup-norm touching 0 needs α < τ = {tau}, got α = {alpha}"
                    )));
                }
            }
            NormSpec::Lq { q, .. } => {
                if !(*q >= 1.0) {
                    return Err(param(format!("L^q norm needs q >= 1, got {q}")));
                }
            }
            NormSpec::IntegratedLq { q, .. } => {
                if !(*q > 1.0) {
                    return Err(param(format!("integrated L^q norm needs q > 1, got {q}")));
                }
            }
        }
        Ok(())
    }

    fn is_plain_sup(&self) -> bool {
        matches!(self, NormSpec::WeightedSup { alpha, interval } if *alpha == 0.0 && interval[0] == 0.0)
    }
}

fn support_interval(w: &Weight) -> Result<[f64; 2]> {
    w.support()
        .map(|(a, b)| [a, b])
        .ok_or_else(|| param("weight has empty support"))
}

/// How per-path success is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Bridge estimator when it applies, indicator otherwise.
    #[default]
    Auto,
    /// `1{‖X‖_grid < ε}`.
    Indicator,
    /// Brownian motion only: the conditional probability, given the grid
    /// values, that the continuous path stays inside `(−ε, ε)`.
    BrownianBridge,
}

/// Grid size as a function of the smallest ε in play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridRule {
    Fixed {
        intervals: usize,
    },
    /// `max(2^12, round(c · ε^{−1/τ}) · 64)` intervals.
    Scaled {
        c: f64,
    },
}

impl GridRule {
    pub fn intervals(&self, eps_min: f64, tau: f64) -> usize {
        match *self {
            GridRule::Fixed { intervals } => intervals.max(2) & !1,
            GridRule::Scaled { c } => {
                let n = (c * eps_min.powf(-1.0 / tau)).round().max(1.0) as usize * 64;
                n.max(1 << 12)
            }
        }
    }
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule::Scaled { c: 1.0 }
    }
}

/// Monte Carlo settings shared by every estimator here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_paths: u64,
    pub grid: GridRule,
    pub seed: SeedSpec,
    pub estimator: Estimator,
    /// Accept `p̂ < 10⁻⁴`.
    pub allow_rare: bool,
    /// Multiply every path by this factor before evaluating the norm.
    pub scale: f64,
}

impl McOptions {
    pub fn new(n_paths: u64, grid: GridRule, seed: SeedSpec) -> Self {
        Self {
            n_paths,
            grid,
            seed,
            estimator: Estimator::Auto,
            allow_rare: false,
            scale: 1.0,
        }
    }

    pub fn with_estimator(mut self, e: Estimator) -> Self {
        self.estimator = e;
        self
    }

    pub fn allow_rare(mut self, yes: bool) -> Self {
        self.allow_rare = yes;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

/// One probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub epsilon: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// 95% interval (Wilson for indicators, normal for bridge weights).
    pub interval: [f64; 2],
    /// Paths with a nonzero score.
    pub successes: u64,
    pub n_paths: u64,
    pub grid_n: usize,
    pub p_hat_coarse: f64,
    pub stderr_coarse: f64,
    /// `|p̂_coarse − p̂|`.
    pub refinement_gap: f64,
    /// No successes: only the upper end of `interval` is meaningful.
    pub zero_successes: bool,
}

/// Regression model for `−log p̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `κ ε^{−1/τ} + c`.
    #[default]
    PowerOnly,
    /// `κ ε^{−1/τ} + c₁ log(1/ε) + c₀`.
    PowerWithLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallResult {
    pub schema_version: u32,
    pub spec: ProcessSpec,
    pub norm: NormSpec,
    pub estimator: Estimator,
    pub model: FitModel,
    /// `τ` of the fit.
    pub exponent: f64,
    pub epsilons: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub p_hat_coarse: Vec<f64>,
    pub n_paths: u64,
    pub grid_n: usize,
    pub kappa_hat: f64,
    pub kappa_se: f64,
    pub kappa_ci: [f64; 2],
    /// `κ̂ a_H^{−1/τ}` on the fBm branch (the constant in `P(‖X‖ < a_H ε)`),
    /// equal to `kappa_hat` otherwise.
    pub kappa_normalized: f64,
    pub fit_r2: f64,
    pub fit_coef: Vec<f64>,
    pub warnings: Vec<String>,
    pub seed: SeedSpec,
}

impl SmallBallResult {
    /// Rows `epsilon,p_hat,stderr,n_paths,grid_n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,p_hat,stderr,n_paths,grid_n\n");
        for i in 0..self.epsilons.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.epsilons[i], self.p_hat[i], self.stderr[i], self.n_paths, self.grid_n
            );
        }
        s
    }
}

/// Norm evaluation on a fixed grid, at full resolution (`stride = 1`) or
/// on every other point (`stride = 2`).
struct PreparedNorm {
    kind: PreparedKind,
    stride: usize,
}

enum PreparedKind {
    /// `max_k |v_k| · factor_k` over `nodes`.
    Sup { nodes: Vec<usize>, factor: Vec<f64> },
    /// `q < ∞`: `(Σ_cells c_j (f_k + f_{k+s})/2)^{1/q}`, `f = |v · pow|^q`;
    /// `q = ∞`: `max |v_k| pow_k |w_k|` over cell endpoints.
    Lq {
        q: f64,
        pow: Vec<f64>,
        cells: Vec<(usize, f64)>,
        node_weight: Vec<f64>,
    },
    /// Trapezoid primitive of `w s^{Σα} v`, then its `L^q` norm on `[a, b]`.
    IntegratedLq {
        q: f64,
        pow: Vec<f64>,
        cells: Vec<(usize, f64)>,
        first_node: usize,
    },
}

impl PreparedNorm {
    fn new(norm: &NormSpec, spec: &ProcessSpec, times: &[f64], stride: usize) -> Self {
        let sum_alpha = spec.weight_sum();
        let [a, b] = norm.interval();
        let tol = 1e-12 * b;
        let inside = |t: f64| t >= a - tol && t <= b + tol;
        let nodes: Vec<usize> = (0..times.len()).step_by(stride).collect();
        let cells_of = |w: &dyn Fn(f64) -> f64| -> Vec<(usize, f64)> {
            nodes
                .windows(2)
                .filter(|p| inside(times[p[0]]) && inside(times[p[1]]))
                .map(|p| {
                    let mid = 0.5 * (times[p[0]] + times[p[1]]);
                    (p[0], w(mid) * (times[p[1]] - times[p[0]]))
                })
                .collect()
        };
        let pow = |e: f64| -> Vec<f64> {
            times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        if e > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        t.powf(e)
                    }
                })
                .collect()
        };
        let kind = match norm {
            NormSpec::WeightedSup { alpha, .. } => {
                let e = alpha - sum_alpha;
                let nodes: Vec<usize> = nodes
                    .iter()
                    .copied()
                    .filter(|&k| inside(times[k]))
                    .collect();
                let factor = nodes
                    .iter()
                    .map(|&k| {
                        let t = times[k];
                        // X(t)/t^e → 0 at t = 0 whenever the norm is admissible.
                        if t == 0.0 {
                            0.0
                        } else {
                            t.powf(-e)
                        }
                    })
                    .collect();
                PreparedKind::Sup { nodes, factor }
            }
            NormSpec::Lq { q, weight, .. } => {
                let qq = *q;
                let cells = if qq.is_infinite() {
                    vec![]
                } else {
                    cells_of(&|m| weight.eval(m).abs().powf(qq))
                };
                let node_weight = times
                    .iter()
                    .map(|&t| if inside(t) { weight.eval(t).abs() } else { 0.0 })
                    .collect();
                PreparedKind::Lq {
                    q: qq,
                    pow: pow(sum_alpha),
                    cells,
                    node_weight,
                }
            }
            NormSpec::IntegratedLq { q, weight, .. } => {
                let all_cells: Vec<(usize, f64)> = nodes
                    .windows(2)
                    .filter(|p| times[p[1]] <= b + tol)
                    .map(|p| {
                        let mid = 0.5 * (times[p[0]] + times[p[1]]);
                        (p[0], weight.eval(mid) * (times[p[1]] - times[p[0]]))
                    })
                    .collect();
                let first_node = nodes
                    .iter()
                    .copied()
                    .find(|&k| inside(times[k]))
                    .unwrap_or(0);
                PreparedKind::IntegratedLq {
                    q: *q,
                    pow: pow(sum_alpha),
                    cells: all_cells,
                    first_node,
                }
            }
        };
        Self { kind, stride }
    }

    fn eval(&self, v: &[f64], times: &[f64], norm_interval: [f64; 2]) -> f64 {
        let s = self.stride;
        match &self.kind {
            PreparedKind::Sup { nodes, factor } => nodes
                .iter()
                .zip(factor)
                .fold(0.0f64, |m, (&k, f)| m.max(v[k].abs() * f)),
            PreparedKind::Lq {
                q,
                pow,
                cells,
                node_weight,
            } => {
                if q.is_infinite() {
                    (0..v.len())
                        .step_by(s)
                        .fold(0.0f64, |m, k| m.max(v[k].abs() * pow[k] * node_weight[k]))
                } else {
                    let f = |k: usize| (v[k] * pow[k]).abs().powf(*q);
                    let sum: f64 = cells
                        .iter()
                        .map(|&(k, c)| c * 0.5 * (f(k) + f(k + s)))
                        .sum();
                    sum.powf(1.0 / q)
                }
            }
            PreparedKind::IntegratedLq {
                q,
                pow,
                cells,
                first_node,
            } => {
                let [a, b] = norm_interval;
                let tol = 1e-12 * b;
                let g = |k: usize| v[k] * pow[k];
                let mut y = 0.0;
                let mut acc = 0.0;
                let mut prev: Option<f64> = if *first_node == 0 { Some(0.0) } else { None };
                for &(k, c) in cells {
                    y += c * 0.5 * (g(k) + g(k + s));
                    let t0 = times[k];
                    let t1 = times[k + s];
                    if t1 >= a - tol && t1 <= b + tol {
                        match prev {
                            Some(y0) if t0 >= a - tol => {
                                if q.is_infinite() {
                                    acc = f64::max(acc, y.abs());
                                } else {
                                    acc += (t1 - t0) * 0.5 * (y0.abs().powf(*q) + y.abs().powf(*q));
                                }
                            }
                            _ => {
                                if q.is_infinite() {
                                    acc = f64::max(acc, y.abs());
                                }
                            }
                        }
                        prev = Some(y);
                    }
                }
                if q.is_infinite() {
                    acc
                } else {
                    acc.powf(1.0 / q)
                }
            }
        }
    }
}

/// Sampler plus prepared norms on a common grid.
struct Setup {
    sampler: ProcessSampler,
    times: Vec<f64>,
    fine: Vec<PreparedNorm>,
    coarse: Vec<PreparedNorm>,
    norms: Vec<NormSpec>,
    bridge: Vec<bool>,
    grid_n: usize,
}

impl Setup {
    fn new(
        spec: &ProcessSpec,
        norms: &[NormSpec],
        grid_n: usize,
        estimator: Estimator,
    ) -> Result<Self> {
        if norms.is_empty() {
            return Err(param("no norms to evaluate"));
        }
        for n in norms {
            n.validate(spec)?;
        }
        let end = norms.iter().map(|n| n.interval()[1]).fold(0.0, f64::max);
        let grid_n = grid_n.max(2) & !1;
        let grid = Arc::new(TimeGrid::uniform(0.0, end, grid_n)?);
        let times = grid.points().to_vec();
        let sampler = ProcessSampler::new(spec, grid)?;
        let bridge = norms
            .iter()
            .map(|n| {
                let applies = spec.is_brownian() && n.is_plain_sup() && n.interval()[1] == end;
                match estimator {
                    Estimator::Auto => Ok(applies),
                    Estimator::Indicator => Ok(false),
                    Estimator::BrownianBridge if applies => Ok(true),
                    Estimator::BrownianBridge => Err(param(
                        "the bridge estimator needs Brownian motion and the plain sup-norm on [0, T]",
                    )),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fine: norms
                .iter()
                .map(|n| PreparedNorm::new(n, spec, &times, 1))
                .collect(),
            coarse: norms
                .iter()
                .map(|n| PreparedNorm::new(n, spec, &times, 2))
                .collect(),
            sampler,
            times,
            norms: norms.to_vec(),
            bridge,
            grid_n,
        })
    }

    fn norm_values(&self, v: &[f64], scale: f64) -> (Vec<f64>, Vec<f64>) {
        let scaled: Vec<f64>;
        let v = if scale == 1.0 {
            v
        } else {
            scaled = v.iter().map(|x| x * scale).collect();
            &scaled
        };
        let fine = self
            .fine
            .iter()
            .zip(&self.norms)
            .map(|(p, n)| p.eval(v, &self.times, n.interval()))
            .collect();
        let coarse = self
            .coarse
            .iter()
            .zip(&self.norms)
            .map(|(p, n)| p.eval(v, &self.times, n.interval()))
            .collect();
        (fine, coarse)
    }

    /// Per path: scores for every (norm, ε), fine then coarse.
    fn scores(&self, v: &[f64], ladders: &[Vec<f64>], scale: f64, out: &mut Vec<f64>) {
        out.clear();
        let (fine, coarse) = self.norm_values(v, scale);
        let h = self.times[1] - self.times[0];
        for (j, eps_list) in ladders.iter().enumerate() {
            for &eps in eps_list {
                if self.bridge[j] {
                    out.push(bridge_weight(v, scale, eps, h, 1, fine[j]));
                    out.push(bridge_weight(v, scale, eps, h, 2, coarse[j]));
                } else {
                    out.push((fine[j] < eps) as u8 as f64);
                    out.push((coarse[j] < eps) as u8 as f64);
                }
            }
        }
    }
}

fn bridge_weight(v: &[f64], scale: f64, eps: f64, h: f64, stride: usize, grid_sup: f64) -> f64 {
    if grid_sup >= eps {
        return 0.0;
    }
    // Scaling the path by c is the same as shrinking the barrier by c.
    let (e, var) = (eps / scale, h * stride as f64);
    let mut w = 1.0;
    let mut k = 0;
    while k + stride < v.len() {
        w *= bridge_survival(v[k], v[k + stride], var, e);
        if w < 1e-300 {
            return 0.0;
        }
        k += stride;
    }
    w
}

#[derive(Clone, Default)]
struct Sums {
    sum: f64,
    sum_sq: f64,
    nonzero: u64,
}

/// Ordered chunked reduction: deterministic for any worker count.
fn collect(setup: &Setup, ladders: &[Vec<f64>], opts: &McOptions) -> Vec<Sums> {
    let width: usize = 2 * ladders.iter().map(Vec::len).sum::<usize>();
    let mut sums = vec![Sums::default(); width];
    let mut start = 0;
    while start < opts.n_paths {
        let end = (start + CHUNK).min(opts.n_paths);
        let rows = map_paths(&setup.sampler, &opts.seed, start..end, |_, v| {
            let mut out = Vec::with_capacity(width);
            setup.scores(v, ladders, opts.scale, &mut out);
            out
        });
        for row in rows {
            for (s, x) in sums.iter_mut().zip(row) {
                s.sum += x;
                s.sum_sq += x * x;
                s.nonzero += (x > 0.0) as u64;
            }
        }
        start = end;
    }
    sums
}

fn summarize(
    eps: f64,
    fine: &Sums,
    coarse: &Sums,
    n: u64,
    grid_n: usize,
    bridge: bool,
) -> ProbEstimate {
    let nf = n as f64;
    let stats = |s: &Sums| {
        let p = s.sum / nf;
        let var = (s.sum_sq / nf - p * p).max(0.0) * nf / (nf - 1.0).max(1.0);
        (p, (var / nf).sqrt())
    };
    let (p, se) = stats(fine);
    let (pc, sec) = stats(coarse);
    let interval = if bridge {
        [(p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)]
    } else {
        let (lo, hi) = wilson_interval(fine.nonzero, n, 1.96);
        [lo, hi]
    };
    ProbEstimate {
        epsilon: eps,
        p_hat: p,
        stderr: se,
        interval,
        successes: fine.nonzero,
        n_paths: n,
        grid_n,
        p_hat_coarse: pc,
        stderr_coarse: sec,
        refinement_gap: (pc - p).abs(),
        zero_successes: fine.nonzero == 0,
    }
}

fn estimates(
    setup: &Setup,
    ladders: &[Vec<f64>],
    opts: &McOptions,
) -> Result<Vec<Vec<ProbEstimate>>> {
    if opts.n_paths < 2 {
        return Err(param("need at least 2 paths"));
    }
    if !(opts.scale > 0.0) || !opts.scale.is_finite() {
        return Err(param(format!("scale must be > 0, got {}", opts.scale)));
    }
    for eps in ladders.iter().flatten() {
        if !(*eps > 0.0) || !eps.is_finite() {
            return Err(param(format!("ε must be > 0, got {eps}")));
        }
    }
    let sums = collect(setup, ladders, opts);
    let mut out = Vec::with_capacity(ladders.len());
    let mut i = 0;
    for (j, ladder) in ladders.iter().enumerate() {
        let mut row = Vec::with_capacity(ladder.len());
        for &eps in ladder {
            let e = summarize(
                eps,
                &sums[i],
                &sums[i + 1],
                opts.n_paths,
                setup.grid_n,
                setup.bridge[j],
            );
            if !e.zero_successes && e.p_hat < RARE_THRESHOLD && !opts.allow_rare {
                return Err(Error::TooRare(format!(
                    "p̂({eps}) = {:.3e} < {RARE_THRESHOLD:e}; raise ε, or set allow_rare with at least {:.0} paths",
                    e.p_hat,
                    100.0 / e.p_hat
                )));
            }
            row.push(e);
            i += 2;
        }
        out.push(row);
    }
    Ok(out)
}

/// `P(‖X‖ < ε)` with its refinement partner.
pub fn estimate_prob(
    spec: &ProcessSpec,
    norm: &NormSpec,
    eps: f64,
    opts: &McOptions,
) -> Result<ProbEstimate> {
    Ok(estimate_probs(spec, norm, &[eps], opts)?.remove(0))
}

/// Several ε on the same paths.
pub fn estimate_probs(
    spec: &ProcessSpec,
    norm: &NormSpec,
    eps: &[f64],
    opts: &McOptions,
) -> Result<Vec<ProbEstimate>> {
    let tau = norm.exponent(spec);
    let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let setup = Setup::new(
        spec,
        std::slice::from_ref(norm),
        opts.grid.intervals(eps_min, tau),
        opts.estimator,
    )?;
    Ok(estimates(&setup, &[eps.to_vec()], opts)?.remove(0))
}

/// Grid norm values of `n_paths` paths (fine grid).
pub fn norm_samples(
    spec: &ProcessSpec,
    norm: &NormSpec,
    grid_n: usize,
    opts: &McOptions,
) -> Result<Vec<f64>> {
    let setup = Setup::new(
        spec,
        std::slice::from_ref(norm),
        grid_n,
        Estimator::Indicator,
    )?;
    Ok(map_paths(
        &setup.sampler,
        &opts.seed,
        0..opts.n_paths,
        |_, v| setup.norm_values(v, opts.scale).0[0],
    ))
}

/// Default ladder: 6 geometric probability levels from `max(10⁻³, 50/n)` to
/// ½, turned into ε by quantiles of a pilot run on an independent stream.
pub fn auto_ladder(
    spec: &ProcessSpec,
    norm: &NormSpec,
    grid_n: usize,
    opts: &McOptions,
) -> Result<Vec<f64>> {
    Ok(auto_ladders(spec, std::slice::from_ref(norm), grid_n, opts)?.remove(0))
}

fn auto_ladders(
    spec: &ProcessSpec,
    norms: &[NormSpec],
    grid_n: usize,
    opts: &McOptions,
) -> Result<Vec<Vec<f64>>> {
    let n_pilot = (opts.n_paths / 10).clamp(2_000, 200_000);
    let setup = Setup::new(spec, norms, grid_n, Estimator::Indicator)?;
    let pilot_seed = opts.seed.substream(PILOT_TAG);
    let values = map_paths(&setup.sampler, &pilot_seed, 0..n_pilot, |_, v| {
        setup.norm_values(v, opts.scale).0
    });
    let p_lo = (50.0 / opts.n_paths as f64).max(1e-3);
    let levels: Vec<f64> = (0..6)
        .map(|i| p_lo * (0.5 / p_lo).powf(i as f64 / 5.0))
        .collect();
    Ok((0..norms.len())
        .map(|j| {
            let col: Vec<f64> = values.iter().map(|r| r[j]).collect();
            levels.iter().map(|&p| quantile(&col, p)).collect()
        })
        .collect())
}

/// Weighted least squares of `−log p̂` on `ε^{−1/τ}` (and `log 1/ε`).
pub struct KappaFit {
    pub kappa: f64,
    pub se: f64,
    pub r2: f64,
    pub coef: Vec<f64>,
}

pub fn fit_kappa(estimates: &[ProbEstimate], tau: f64, model: FitModel) -> Option<KappaFit> {
    let usable: Vec<&ProbEstimate> = estimates
        .iter()
        .filter(|e| e.p_hat > 0.0 && e.stderr > 0.0)
        .collect();
    let need = match model {
        FitModel::PowerOnly => 3,
        FitModel::PowerWithLog => 4,
    };
    if usable.len() < need {
        return None;
    }
    let design: Vec<Vec<f64>> = usable
        .iter()
        .map(|e| {
            let x = e.epsilon.powf(-1.0 / tau);
            match model {
                FitModel::PowerOnly => vec![x, 1.0],
                FitModel::PowerWithLog => vec![x, -e.epsilon.ln(), 1.0],
            }
        })
        .collect();
    let y: Vec<f64> = usable.iter().map(|e| -e.p_hat.ln()).collect();
    // Delta method: Var(−log p̂) ≈ (se/p̂)².
    let w: Vec<f64> = usable
        .iter()
        .map(|e| (e.p_hat / e.stderr).powi(2))
        .collect();
    let fit = least_squares(&design, &y, Some(&w))?;
    Some(KappaFit {
        kappa: fit.coef[0],
        se: fit.xtx_inv[(0, 0)].sqrt(),
        r2: fit.r2,
        coef: fit.coef,
    })
}

fn a_h_factor(spec: &ProcessSpec, tau: f64) -> Result<f64> {
    Ok(match spec.hurst() {
        Some(h) => a_h(h)?.powf(-1.0 / tau),
        None => 1.0,
    })
}

fn build_result(
    spec: &ProcessSpec,
    norm: &NormSpec,
    ests: Vec<ProbEstimate>,
    opts: &McOptions,
    grid_n: usize,
    estimator: Estimator,
    model: FitModel,
) -> Result<SmallBallResult> {
    let tau = norm.exponent(spec);
    let mut warnings = vec![];
    let fit = fit_kappa(&ests, tau, model);
    let fitted = fit.is_some();
    let (kappa, se, r2, coef) = match fit {
        Some(f) => (f.kappa, f.se, f.r2, f.coef),
        None => {
            warnings.push("too few ladder points with successes to fit κ".to_string());
            (f64::NAN, f64::NAN, f64::NAN, vec![])
        }
    };
    if r2 < 0.98 {
        warnings.push(format!("fit quality: R² = {r2:.4} < 0.98"));
    }
    if !(kappa > 0.0) && fitted {
        warnings.push(format!("non-positive κ̂ = {kappa}"));
    }
    Ok(SmallBallResult {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        norm: norm.clone(),
        estimator,
        model,
        exponent: tau,
        epsilons: ests.iter().map(|e| e.epsilon).collect(),
        p_hat: ests.iter().map(|e| e.p_hat).collect(),
        stderr: ests.iter().map(|e| e.stderr).collect(),
        p_hat_coarse: ests.iter().map(|e| e.p_hat_coarse).collect(),
        n_paths: opts.n_paths,
        grid_n,
        kappa_hat: kappa,
        kappa_se: se,
        kappa_ci: [kappa - 1.96 * se, kappa + 1.96 * se],
        kappa_normalized: kappa * a_h_factor(spec, tau)?,
        fit_r2: r2,
        fit_coef: coef,
        warnings,
        seed: opts.seed,
    })
}

/// Estimate `κ` from an ε-ladder (`None`: automatic ladder).
pub fn estimate_kappa(
    spec: &ProcessSpec,
    norm: &NormSpec,
    ladder: Option<&[f64]>,
    opts: &McOptions,
    model: FitModel,
) -> Result<SmallBallResult> {
    Ok(estimate_kappas(
        spec,
        std::slice::from_ref(norm),
        ladder.map(|l| vec![l.to_vec()]),
        opts,
        model,
    )?
    .remove(0))
}

/// `κ` for several norms of the same process, from the same paths.
pub fn estimate_kappas(
    spec: &ProcessSpec,
    norms: &[NormSpec],
    ladders: Option<Vec<Vec<f64>>>,
    opts: &McOptions,
    model: FitModel,
) -> Result<Vec<SmallBallResult>> {
    let taus: Vec<f64> = norms.iter().map(|n| n.exponent(spec)).collect();
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ladders = match ladders {
        Some(l) => l,
        None => {
            let pilot_grid = opts.grid.intervals(1.0, tau_min).min(1 << 12);
            auto_ladders(spec, norms, pilot_grid, opts)?
        }
    };
    if ladders.len() != norms.len() {
        return Err(param("one ladder per norm is required"));
    }
    for l in &mut ladders {
        l.sort_by(f64::total_cmp);
        l.dedup();
        if l.len() < 4 {
            return Err(param(format!(
                "κ fit needs at least 4 ladder points, got {}",
                l.len()
            )));
        }
    }
    let eps_min = ladders
        .iter()
        .zip(&taus)
        .map(|(l, &t)| opts.grid.intervals(l[0], t))
        .max()
        .unwrap_or(1 << 12);
    let setup = Setup::new(spec, norms, eps_min, opts.estimator)?;
    let mut opts_fit = *opts;
    opts_fit.allow_rare = true;
    let all = estimates(&setup, &ladders, &opts_fit)?;
    norms
        .iter()
        .zip(all)
        .enumerate()
        .map(|(j, (norm, ests))| {
            let est = if setup.bridge[j] {
                Estimator::BrownianBridge
            } else {
                Estimator::Indicator
            };
            build_result(spec, norm, ests, opts, setup.grid_n, est, model)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub alpha: f64,
    pub kappa_hat: f64,
    pub kappa_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub spec: ProcessSpec,
    pub tau: f64,
    pub tolerance: f64,
    pub rows: Vec<ScalingRow>,
    pub results: Vec<SmallBallResult>,
}

impl ScalingReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `κ̂(α)/κ̂(0)` against `1/(1 − α/τ)` for the weighted sup-norm, all α
/// evaluated on the same paths. `α = 0` is added when missing.
pub fn scaling_check(
    spec: &ProcessSpec,
    alphas: &[f64],
    opts: &McOptions,
    model: FitModel,
) -> Result<ScalingReport> {
    let tau = spec.small_ball_exponent();
    let mut list = vec![0.0];
    list.extend(alphas.iter().copied().filter(|&a| a != 0.0));
    if let Some(a) = list.iter().find(|&&a| !(a < tau)) {
        return Err(param(format!("scaling check needs α < τ = {tau}, got {a}")));
    }
    let norms: Vec<NormSpec> = list.iter().map(|&a| NormSpec::weighted_sup(a)).collect();
    let results = estimate_kappas(spec, &norms, None, opts, model)?;
    let k0 = results[0].kappa_hat;
    let se0 = results[0].kappa_se;
    let tolerance = 0.15;
    let rows = list
        .iter()
        .zip(&results)
        .map(|(&alpha, r)| {
            let ratio = r.kappa_hat / k0;
            let ratio_se = ratio * ((r.kappa_se / r.kappa_hat).powi(2) + (se0 / k0).powi(2)).sqrt();
            let target = 1.0 / (1.0 - alpha / tau);
            ScalingRow {
                alpha,
                kappa_hat: r.kappa_hat,
                kappa_se: r.kappa_se,
                ratio,
                ratio_se: if alpha == 0.0 { 0.0 } else { ratio_se },
                target,
                pass: (ratio / target - 1.0).abs() <= tolerance,
            }
        })
        .collect();
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        tau,
        tolerance,
        rows,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqCheckReport {
    pub schema_version: u32,
    pub mode: LqMode,
    pub q: f64,
    pub r: f64,
    pub lr_norms: [f64; 2],
    pub ratio: f64,
    pub ratio_se: f64,
    pub target: f64,
    pub pass: bool,
    /// `κ(τ', q) ‖w_1‖^{1/τ'}` when `κ(τ', q)` is known.
    pub theory_first: Option<f64>,
    pub results: [SmallBallResult; 2],
}

/// `κ̂(w₁)/κ̂(w₂)` against `(‖w₁‖_{L^r}/‖w₂‖_{L^r})^{1/τ'}`, both weights on
/// the same paths, each norm taken over its weight's support.
pub fn lq_check(
    spec: &ProcessSpec,
    q: f64,
    mode: LqMode,
    weights: [&Weight; 2],
    opts: &McOptions,
    model: FitModel,
) -> Result<LqCheckReport> {
    let tau = spec.small_ball_exponent();
    let order = match mode {
        LqMode::Process => tau,
        LqMode::Integrated => tau + 1.0,
    };
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let r = 1.0 / (order + inv_q);
    let mut lr = [0.0; 2];
    for (i, w) in weights.iter().enumerate() {
        // Validates the block-norm condition as a side effect.
        crate::formulas::lq_constant(mode, tau, q, 1.0, w)?;
        lr[i] = lr_norm(w, r)?;
    }
    let norms = weights
        .iter()
        .map(|w| match mode {
            LqMode::Process => NormSpec::lq(q, (*w).clone()),
            LqMode::Integrated => NormSpec::integrated_lq(q, (*w).clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = estimate_kappas(spec, &norms, None, opts, model)?;
    let second = results.pop().expect("two results");
    let first = results.pop().expect("two results");
    let ratio = first.kappa_hat / second.kappa_hat;
    let ratio_se = ratio
        * ((first.kappa_se / first.kappa_hat).powi(2)
            + (second.kappa_se / second.kappa_hat).powi(2))
        .sqrt();
    let target = (lr[0] / lr[1]).powf(1.0 / order);
    let theory_first = match kappa_lq_known(order, q) {
        KappaValue::Exact { value } => Some(value * lr[0].powf(1.0 / order)),
        _ => None,
    };
    Ok(LqCheckReport {
        schema_version: SCHEMA_VERSION,
        mode,
        q,
        r,
        lr_norms: lr,
        ratio,
        ratio_se,
        target,
        pass: (ratio / target - 1.0).abs() <= 0.15,
        theory_first,
        results: [first, second],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_on_identity(norm: &NormSpec, stride: usize) -> f64 {
        let spec = ProcessSpec::brownian();
        let n = 1000;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let p = PreparedNorm::new(norm, &spec, &times, stride);
        p.eval(&times, &times, norm.interval())
    }

    #[test]
    fn norms_of_the_identity_path() {
        let one = Weight::indicator(0.0, 1.0).unwrap();
        assert!((eval_on_identity(&NormSpec::sup(), 1) - 1.0).abs() < 1e-15);
        assert!((eval_on_identity(&NormSpec::weighted_sup(0.5), 1) - 1.0).abs() < 1e-12);
        let lq = NormSpec::lq(2.0, one.clone()).unwrap();
        assert!((eval_on_identity(&lq, 1) - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
        assert!((eval_on_identity(&lq, 2) - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        let lq_inf = NormSpec::lq(f64::INFINITY, one.clone()).unwrap();
        assert!((eval_on_identity(&lq_inf, 1) - 1.0).abs() < 1e-15);
        let int = NormSpec::integrated_lq(2.0, one).unwrap();
        assert!((eval_on_identity(&int, 1) - (1.0f64 / 20.0).sqrt()).abs() < 1e-6);
        // Over [½, 1] only: ∫_{1/2}^1 t⁴/4 dt = 31/640.
        let half = Weight::indicator(0.5, 1.0).unwrap();
        let int_half = NormSpec::IntegratedLq {
            q: 2.0,
            weight: Weight::indicator(0.0, 1.0).unwrap(),
            interval: [0.5, 1.0],
        };
        assert!((eval_on_identity(&int_half, 1) - (31.0f64 / 640.0).sqrt()).abs() < 1e-6);
        // Weight only on [½, 1]: Y(t) = (t² − ¼)/2 there.
        let w_half = NormSpec::integrated_lq(2.0, half).unwrap();
        let quad = {
            let n = 100_000;
            let h = 0.5 / n as f64;
            (0..n)
                .map(|k| {
                    let t = 0.5 + (k as f64 + 0.5) * h;
                    ((t * t - 0.25) / 2.0).powi(2) * h
                })
                .sum::<f64>()
                .sqrt()
        };
        assert!((eval_on_identity(&w_half, 1) - quad).abs() < 1e-6);
    }

    #[test]
    fn scaled_grid_rule() {
        let r = GridRule::Scaled { c: 1.0 };
        assert_eq!(r.intervals(1.0, 0.5), 4096);
        assert_eq!(r.intervals(0.01, 0.5), 10_000 * 64);
        assert_eq!(GridRule::Fixed { intervals: 101 }.intervals(0.1, 0.5), 100);
    }
}
