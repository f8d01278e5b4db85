//! The acceptance suite: one check per criterion, at three sizes.
//!
//! `Full` runs the stated sample sizes, `Quick` trims the Monte Carlo work,
//! `Smoke` is tiny and only meant for plumbing and determinism checks (its
//! verdicts are not meaningful). Reports serialize deterministically: wall
//! times are kept out of the JSON.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formulas::{
    a_h, brownian_sup_smallball_exact, r_lambda, sigma2_general, sigma2_general_checked, sigma2_w,
    sigma_tilde2_b, StationaryCovariance,
};
use crate::grid::{GridPath, TimeGrid};
use crate::lil_lab::{run_integral_liminf, run_sup_lil, LilExperiment, Theorem};
use crate::mc::with_workers;
use crate::operators::{compose_weighted, integrate_m, riemann_liouville};
use crate::process::ProcessSpec;
use crate::quad::Tolerance;
use crate::rng::SeedSpec;
use crate::smallball::{
    estimate_kappa, estimate_probs, scaling_check, FitModel, GridRule, McOptions, NormSpec,
};
use crate::urn::{default_checkpoints, lil_diagnostics, rpw_params, UrnParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Full,
    Quick,
    Smoke,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Profile::Full),
            "quick" => Ok(Profile::Quick),
            "smoke" => Ok(Profile::Smoke),
            _ => Err(format!("unknown profile {s:?} (full, quick, smoke)")),
        }
    }
}

struct Sizes {
    c2_paths: u64,
    c3_prob_paths: u64,
    c3_kappa_paths: u64,
    c4_paths: u64,
    c4_grid: GridRule,
    lil_replicas: u64,
    urn_replicas: u64,
    urn_checkpoints: Vec<u64>,
}

impl Profile {
    fn sizes(self) -> Sizes {
        match self {
            Profile::Full => Sizes {
                c2_paths: 100_000,
                c3_prob_paths: 10_000_000,
                c3_kappa_paths: 1_000_000,
                c4_paths: 1_000_000,
                c4_grid: GridRule::default(),
                lil_replicas: 50,
                urn_replicas: 100,
                urn_checkpoints: default_checkpoints(),
            },
            Profile::Quick => Sizes {
                c2_paths: 100_000,
                c3_prob_paths: 1_000_000,
                c3_kappa_paths: 200_000,
                c4_paths: 200_000,
                c4_grid: GridRule::default(),
                lil_replicas: 50,
                urn_replicas: 100,
                urn_checkpoints: default_checkpoints(),
            },
            Profile::Smoke => Sizes {
                c2_paths: 2_000,
                c3_prob_paths: 20_000,
                c3_kappa_paths: 10_000,
                c4_paths: 5_000,
                c4_grid: GridRule::Fixed { intervals: 512 },
                lil_replicas: 4,
                urn_replicas: 4,
                urn_checkpoints: vec![1 << 10, 1 << 12, 1 << 14],
            },
        }
    }
}

/// Stated runtime budget of each criterion, in seconds.
pub fn budget_seconds(id: u8) -> Option<f64> {
    match id {
        1 => Some(1.0),
        2 => Some(60.0),
        3 => Some(600.0),
        4 => Some(1800.0),
        5 => Some(300.0),
        7 => Some(1200.0),
        9 => Some(900.0),
        10 => Some(60.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    /// One line per individual check.
    pub checks: Vec<String>,
    pub measurements: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub profile: Profile,
    pub seed: SeedSpec,
    pub criteria: Vec<CriterionOutcome>,
    pub all_pass: bool,
    /// Wall time per criterion (not serialized: outputs must be reproducible).
    #[serde(skip)]
    pub elapsed: Vec<f64>,
}

impl VerifyReport {
    /// `criterion N: PASS|FAIL — title` plus the individual checks.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&format!(
                "criterion {:>2}: {} — {}\n",
                c.id,
                if c.pass { "PASS" } else { "FAIL" },
                c.title
            ));
            for line in &c.checks {
                s.push_str(&format!("    {line}\n"));
            }
        }
        s.push_str(&format!(
            "overall: {}\n",
            if self.all_pass { "PASS" } else { "FAIL" }
        ));
        s
    }
}

/// Accumulates checks for one criterion.
struct Checks {
    pass: bool,
    lines: Vec<String>,
    values: BTreeMap<String, f64>,
}

impl Checks {
    fn new() -> Self {
        Self {
            pass: true,
            lines: vec![],
            values: BTreeMap::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines
            .push(format!("[{}] {line}", if ok { "ok" } else { "FAIL" }));
    }

    fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    /// Record an error as a failed check.
    fn attempt<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, format!("{what}: error: {e}"));
                None
            }
        }
    }
}

pub const ALL_CRITERIA: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "a_H(1/2) = 1",
        2 => "sigma2_W matches the Monte Carlo variance of W_lambda(1)",
        3 => "Brownian sup small ball: probabilities and kappa",
        4 => "integrated Brownian kappa band and alpha scaling",
        5 => "2 * integral of r_rec equals sigma_tilde2",
        6 => "special values of sigma2_general and r_lambda",
        7 => "integral liminf, Brownian motion",
        8 => "sup-LIL, Brownian and integrated Brownian",
        9 => "RPW urn identity, proportions and Chung statistic",
        10 => "operator laws",
        11 => "determinism across worker counts",
        _ => "unknown criterion",
    }
}

/// Run the listed criteria.
pub fn run(profile: Profile, seed: SeedSpec, ids: &[u8]) -> VerifyReport {
    let mut criteria = vec![];
    let mut elapsed = vec![];
    for &id in ids {
        let t0 = Instant::now();
        let c = run_one(id, profile, seed);
        elapsed.push(t0.elapsed().as_secs_f64());
        criteria.push(CriterionOutcome {
            id,
            title: title(id).to_string(),
            pass: c.pass,
            checks: c.lines,
            measurements: c.values,
        });
    }
    let all_pass = criteria.iter().all(|c| c.pass);
    VerifyReport {
        schema_version: SCHEMA_VERSION,
        profile,
        seed,
        criteria,
        all_pass,
        elapsed,
    }
}

/// Run a single criterion.
pub fn run_criterion(id: u8, profile: Profile, seed: SeedSpec) -> CriterionOutcome {
    run(profile, seed, &[id]).criteria.remove(0)
}

fn run_one(id: u8, profile: Profile, seed: SeedSpec) -> Checks {
    let mut c = Checks::new();
    let sizes = profile.sizes();
    match id {
        1 => c1(&mut c),
        2 => c2(&mut c, &sizes, seed.substream(2)),
        3 => c3(&mut c, &sizes, seed.substream(3)),
        4 => c4(&mut c, &sizes, seed.substream(4)),
        5 => c5(&mut c),
        6 => c6(&mut c),
        7 => c7(&mut c, &sizes, seed.substream(7)),
        8 => c8(&mut c, &sizes, seed.substream(8)),
        9 => c9(&mut c, &sizes, seed.substream(9)),
        10 => c10(&mut c),
        11 => c11(&mut c, seed),
        _ => c.check(false, format!("no criterion {id}")),
    }
    c
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c1(c: &mut Checks) {
    if let Some(v) = c.attempt("a_H(0.5)", a_h(0.5)) {
        c.value("a_half", v);
        c.check(
            (v - 1.0).abs() <= 1e-8,
            format!("a_H(0.5) = {v:.15} (tolerance 1e-8)"),
        );
    }
}

fn c2(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    for (i, lambda) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let Ok(spec) = ProcessSpec::rl(lambda) else {
            continue;
        };
        let Some(exact) = c.attempt("sigma2_W", sigma2_w(lambda)) else {
            continue;
        };
        // Marginal variances of the sampler are exact on any grid.
        let r = sigma2_general_checked(&spec, s.c2_paths, 64, &seed.substream(i as u64));
        let (mc, se) = match r {
            Ok(v) => (v.monte_carlo, v.std_error),
            Err(e) => {
                c.check(false, format!("lambda = {lambda}: {e}"));
                continue;
            }
        };
        let z = (mc - exact) / se;
        c.value(format!("lambda_{lambda}_mc"), mc);
        c.value(format!("lambda_{lambda}_z"), z);
        c.check(
            z.abs() <= 3.0,
            format!("lambda = {lambda}: sigma2_W = {exact:.6}, MC {mc:.6} ± {se:.6} (z = {z:.2}, limit 3 SE, {} paths)", s.c2_paths),
        );
    }
}

fn c3(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    let bm = ProcessSpec::brownian();
    let eps = [0.3, 0.5, 0.8];
    let opts =
        McOptions::new(s.c3_prob_paths, GridRule::Fixed { intervals: 64 }, seed).allow_rare(true);
    if let Some(ps) = c.attempt(
        "estimate_probs",
        estimate_probs(&bm, &NormSpec::sup(), &eps, &opts),
    ) {
        for p in ps {
            let Some(exact) = c.attempt("exact", brownian_sup_smallball_exact(p.epsilon)) else {
                continue;
            };
            let tol = 3.0 * p.stderr + p.refinement_gap;
            c.value(format!("p_hat_{}", p.epsilon), p.p_hat);
            c.value(format!("p_exact_{}", p.epsilon), exact);
            c.check(
                (p.p_hat - exact).abs() <= tol,
                format!(
                    "eps = {}: p_hat {:.6e} ± {:.2e} (gap {:.2e}) vs exact {exact:.6e}, {} paths",
                    p.epsilon, p.p_hat, p.stderr, p.refinement_gap, p.n_paths
                ),
            );
        }
    }
    let kopts = McOptions::new(
        s.c3_kappa_paths,
        GridRule::Fixed { intervals: 64 },
        seed.substream(1),
    );
    if let Some(r) = c.attempt(
        "estimate_kappa",
        estimate_kappa(&bm, &NormSpec::sup(), None, &kopts, FitModel::PowerOnly),
    ) {
        let target = PI * PI / 8.0;
        c.value("kappa_hat", r.kappa_hat);
        c.check(
            rel(r.kappa_hat, target) <= 0.10,
            format!(
                "kappa_hat = {:.4} ± {:.4} vs pi^2/8 = {target:.4} (limit 10%), R² = {:.5}",
                r.kappa_hat, r.kappa_se, r.fit_r2
            ),
        );
    }
}

fn c4(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    let ib = ProcessSpec::integrated_brownian();
    let opts = McOptions::new(s.c4_paths, s.c4_grid, seed);
    let Some(r) = c.attempt(
        "scaling_check",
        scaling_check(&ib, &[0.5, 0.75], &opts, FitModel::PowerWithLog),
    ) else {
        return;
    };
    let k0 = r.rows[0].kappa_hat;
    c.value("kappa_hat_alpha_0", k0);
    c.check(
        (0.30..=1.53).contains(&k0),
        format!(
            "kappa_hat(0) = {k0:.4} ± {:.4} in [0.30, 1.53]",
            r.rows[0].kappa_se
        ),
    );
    for row in &r.rows[1..] {
        c.value(format!("ratio_alpha_{}", row.alpha), row.ratio);
        c.check(
            rel(row.ratio, row.target) <= 0.15,
            format!(
                "alpha = {}: kappa ratio {:.4} ± {:.4} vs 1/(1-2alpha/3) = {:.4} (limit 15%)",
                row.alpha, row.ratio, row.ratio_se, row.target
            ),
        );
    }
}

fn c5(c: &mut Checks) {
    let cases: [(&str, f64, Vec<f64>); 4] = [
        ("m=0, H=0.5", 0.5, vec![]),
        ("m=0, H=0.7", 0.7, vec![]),
        ("m=1, alpha=(0), H=0.5", 0.5, vec![0.0]),
        ("m=1, alpha=(0.5), H=0.5", 0.5, vec![0.5]),
    ];
    for (name, h, w) in cases {
        let spec = match ProcessSpec::fbm(h).and_then(|s| s.with_weights(w.clone())) {
            Ok(s) => s,
            Err(e) => {
                c.check(false, format!("{name}: {e}"));
                continue;
            }
        };
        let Some(cov) = c.attempt(name, StationaryCovariance::new(&spec)) else {
            continue;
        };
        let Some(q) = c.attempt(
            name,
            cov.long_run_variance_quadrature(Tolerance::new(1e-13, 1e-9)),
        ) else {
            continue;
        };
        let Some(closed) = c.attempt(name, sigma_tilde2_b(h, 0.0, &w)) else {
            continue;
        };
        c.value(format!("{name}: quadrature"), q.value);
        c.check(
            rel(q.value, closed) <= 1e-4,
            format!(
                "{name}: 2∫r = {:.10} vs sigma_tilde2_B = {closed:.10} (rel {:.1e}, limit 1e-4)",
                q.value,
                rel(q.value, closed)
            ),
        );
    }
}

fn c6(c: &mut Checks) {
    for alpha in [0.0, 0.5, 1.0] {
        let Ok(spec) = ProcessSpec::integrated_brownian().with_weights(vec![alpha]) else {
            continue;
        };
        let Some(v) = c.attempt("sigma2_general", sigma2_general(&spec)) else {
            continue;
        };
        let target = 2.0 / ((2.0 - alpha) * (3.0 - 2.0 * alpha));
        c.value(format!("sigma2_alpha_{alpha}"), v);
        c.check(
            rel(v, target) <= 1e-3,
            format!("alpha = {alpha}: sigma2_general = {v:.10} vs 2/((2-a)(3-2a)) = {target:.10} (limit 1e-3 rel)"),
        );
    }
    for h in [0.0, 1.0, 5.0] {
        let Some(v) = c.attempt("r_lambda", r_lambda(0.5, h)) else {
            continue;
        };
        let target = (-h / 2.0).exp();
        c.check(
            (v - target).abs() <= 1e-10,
            format!("r_lambda(0.5, {h}) = {v:.14} vs e^(-h/2) = {target:.14} (limit 1e-10)"),
        );
    }
}

fn c7(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    let exp = LilExperiment::new(
        ProcessSpec::brownian(),
        Theorem::IntegralLiminf,
        s.lil_replicas,
        seed,
    );
    if let Some(r) = c.attempt("run_integral_liminf", run_integral_liminf(&exp)) {
        let m = r.final_median_ratio();
        c.value("median_ratio", m);
        c.check(
            (m - 1.0).abs() <= 0.25,
            format!(
                "median running min / (pi/sqrt 2) = {m:.4} at S = {} over {} replicas (limit ±25%)",
                r.experiment.log_horizons.last().unwrap_or(&f64::NAN),
                s.lil_replicas
            ),
        );
        c.check(
            r.running_min_nonincreasing,
            "running minima nonincreasing".into(),
        );
    }
}

fn c8(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    let specs = [
        ("Brownian", Ok(ProcessSpec::brownian())),
        (
            "m=1, H=1/2, alpha=0.5",
            ProcessSpec::integrated_brownian().with_weights(vec![0.5]),
        ),
    ];
    for (i, (name, spec)) in specs.into_iter().enumerate() {
        let Some(spec) = c.attempt(name, spec) else {
            continue;
        };
        let exp = LilExperiment::new(
            spec,
            Theorem::SupLil,
            s.lil_replicas,
            seed.substream(i as u64),
        );
        let Some(r) = c.attempt(name, run_sup_lil(&exp)) else {
            continue;
        };
        let m = r.final_median_ratio();
        c.value(format!("{name}: median_ratio"), m);
        c.check(
            (0.8..=1.1).contains(&m),
            format!(
                "{name}: median ratio {m:.4} in [0.8, 1.1] (sigma = {:.6})",
                r.theory_constant
            ),
        );
        c.check(
            r.convergence_rho > 0.0 && r.convergence_p_value < 0.01,
            format!(
                "{name}: trend toward sigma, Spearman {:.3} (p = {:.1e}, limit 0.01)",
                r.convergence_rho, r.convergence_p_value
            ),
        );
    }
}

fn c9(c: &mut Checks, s: &Sizes, seed: SeedSpec) {
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let Ok(p) = UrnParams::new(0.05 + 0.09 * i as f64, 0.05 + 0.09 * j as f64, 1.0, 1.0)
            else {
                continue;
            };
            if let Ok(k) = rpw_params(&p) {
                worst = worst.max((k.rho * k.rho * k.sigma1_sq + k.sigma2_sq - k.sigma1_sq).abs());
            }
        }
    }
    c.value("identity_max_error", worst);
    c.check(
        worst <= 1e-12,
        format!("rho²σ1²+σ2² = σ1² over 100 parameter points, max error {worst:.1e}"),
    );

    for (k, (pw, pb)) in [(0.5, 0.5), (0.7, 0.4)].into_iter().enumerate() {
        let Ok(p) = UrnParams::new(pw, pb, 1.0, 1.0) else {
            continue;
        };
        let Some(r) = c.attempt(
            "lil_diagnostics",
            lil_diagnostics(
                &p,
                s.urn_replicas,
                &s.urn_checkpoints,
                &seed.substream(k as u64),
            ),
        ) else {
            continue;
        };
        // Last checkpoint at or below 10⁶.
        let idx = r
            .checkpoints
            .iter()
            .rposition(|&n| n <= 1_000_000)
            .unwrap_or(0);
        let (m, se, v) = (r.mean_y_over_n[idx], r.se_y_over_n[idx], r.constants.v);
        c.check(
            (m - v).abs() <= 3.0 * se,
            format!("p = ({pw}, {pb}): mean Y_n/n = {m:.6} ± {se:.1e} vs v = {v:.6} at n = {} (limit 3 SE)", r.checkpoints[idx]),
        );
        if pw == pb {
            let ratio = r.median_chung_y_ratio;
            c.value("chung_median_ratio", ratio);
            c.check(
                (ratio - 1.0).abs() <= 0.30,
                format!(
                    "symmetric: median Chung statistic / (σ1 π/√8) = {ratio:.4} over {} replicas at n = {} (limit ±30%)",
                    s.urn_replicas,
                    r.checkpoints.last().unwrap_or(&0)
                ),
            );
        }
    }
}

fn c10(c: &mut Checks) {
    let n = 1 << 14;
    let Some(grid) = c.attempt("grid", TimeGrid::uniform(0.0, 1.0, n).map(Arc::new)) else {
        return;
    };
    let path =
        |f: &dyn Fn(f64) -> f64, index: Option<f64>| GridPath::from_fn(Arc::clone(&grid), f, index);
    let sup = |a: &GridPath, b: &GridPath| {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    if let Some(w) = c.attempt("path", path(&|t| t, Some(1.0))) {
        for (g1, g2) in [(0.5, 0.5), (0.3, 1.2), (0.7, 0.25)] {
            let lhs = riemann_liouville(&w, g2).and_then(|p| riemann_liouville(&p, g1));
            let rhs = riemann_liouville(&w, g1 + g2);
            if let (Some(l), Some(r)) = (c.attempt("I∘I", lhs), c.attempt("I", rhs)) {
                let d = sup(&l, &r);
                c.value(format!("semigroup_{g1}_{g2}"), d);
                c.check(
                    d <= 1e-4,
                    format!(
                        "I_{g1}∘I_{g2} vs I_{}: sup error {d:.2e} at 2^14 points (limit 1e-4)",
                        g1 + g2
                    ),
                );
            }
        }
    }
    if let Some(w) = c.attempt("path", path(&|t| (2.0 * t).cos() + t, Some(0.0))) {
        for m in [1usize, 2, 3] {
            let j = compose_weighted(&w, &vec![0.0; m]);
            let i = integrate_m(&w, m);
            if let (Some(j), Some(i)) = (c.attempt("J", j), c.attempt("I_m", i)) {
                let d = sup(&j, &i);
                c.value(format!("j_{m}_0_vs_i_{m}"), d);
                c.check(
                    d <= 1e-4,
                    format!("J_{{{m},0}} vs I_{m}: sup error {d:.2e} at 2^14 points (limit 1e-4)"),
                );
            }
        }
    }
}

/// The smoke profile twice, on one and on two workers, compared as JSON bytes.
fn c11(c: &mut Checks, seed: SeedSpec) {
    let ids: Vec<u8> = ALL_CRITERIA.iter().copied().filter(|&i| i != 11).collect();
    let one = with_workers(1, || run(Profile::Smoke, seed, &ids));
    let two = with_workers(2, || run(Profile::Smoke, seed, &ids));
    let (a, b) = match (serde_json::to_string(&one), serde_json::to_string(&two)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            c.check(false, "serialization failed".into());
            return;
        }
    };
    c.value("bytes", a.len() as f64);
    c.check(
        a == b,
        format!(
            "smoke-profile report on 1 and 2 workers: {} bytes, identical = {}",
            a.len(),
            a == b
        ),
    );
}
