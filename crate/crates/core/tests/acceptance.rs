//! Acceptance criteria, computed directly through the public API with the
//! stated tolerances pinned below. Prints one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use fraclab::formulas::{
    a_h, brownian_sup_smallball_exact, r_lambda, sigma2_general, sigma2_general_checked, sigma2_w,
    sigma_tilde2_b, StationaryCovariance,
};
use fraclab::lil_lab::{run_integral_liminf, run_sup_lil, LilExperiment, Theorem};
use fraclab::mc::with_workers;
use fraclab::operators::{compose_weighted, integrate_m, riemann_liouville};
use fraclab::quad::Tolerance;
use fraclab::smallball::{
    estimate_kappa, estimate_probs, scaling_check, FitModel, GridRule, McOptions, NormSpec,
};
use fraclab::urn::{default_checkpoints, lil_diagnostics, rpw_params, UrnParams};
use fraclab::verify::{self, Profile};
use fraclab::{GridPath, ProcessSpec, SeedSpec, TimeGrid};

// 1
const A_HALF_TOL: f64 = 1e-8;
const C1_BUDGET: f64 = 1.0;
// 2
const C2_PATHS: u64 = 100_000;
const C2_Z: f64 = 3.0;
const C2_BUDGET: f64 = 60.0;
// 3
const C3_EPS: [f64; 3] = [0.3, 0.5, 0.8];
const C3_PROB_PATHS: u64 = 10_000_000;
const C3_KAPPA_PATHS: u64 = 1_000_000;
const C3_SE: f64 = 3.0;
const C3_KAPPA_REL: f64 = 0.10;
const C3_BUDGET: f64 = 600.0;
// 4
const C4_PATHS: u64 = 1_000_000;
const C4_BAND: [f64; 2] = [0.30, 1.53];
const C4_ALPHAS: [f64; 2] = [0.5, 0.75];
const C4_RATIO_REL: f64 = 0.15;
const C4_BUDGET: f64 = 1800.0;
// 5
const C5_REL: f64 = 1e-4;
const C5_BUDGET: f64 = 300.0;
// 6
const C6_REL: f64 = 1e-3;
const C6_R_ABS: f64 = 1e-10;
// 7
const C7_REPLICAS: u64 = 50;
const C7_HORIZON: f64 = 1e4;
const C7_BAND: f64 = 0.25;
const C7_BUDGET: f64 = 1200.0;
// 8
const C8_REPLICAS: u64 = 50;
const C8_BAND: [f64; 2] = [0.8, 1.1];
const C8_TREND_P: f64 = 0.01;
// 9
const C9_IDENTITY: f64 = 1e-12;
const C9_N: u64 = 1_000_000;
const C9_SE: f64 = 3.0;
const C9_REPLICAS: u64 = 100;
const C9_CHUNG_BAND: f64 = 0.30;
const C9_BUDGET: f64 = 900.0;
// 10
const C10_POINTS: usize = 1 << 14;
const C10_SUP: f64 = 1e-4;
const C10_BUDGET: f64 = 60.0;

fn seed(tag: u64) -> SeedSpec {
    SeedSpec::new(31_415, tag)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            notes: vec![],
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes
            .push(format!("{}{note}", if ok { "" } else { "FAILED " }));
    }
}

fn c1() -> Outcome {
    let mut o = Outcome::new();
    let v = a_h(0.5).unwrap();
    o.check((v - 1.0).abs() <= A_HALF_TOL, format!("a_H(0.5) = {v:.15}"));
    o
}

fn c2() -> Outcome {
    let mut o = Outcome::new();
    for (i, lambda) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let spec = ProcessSpec::rl(lambda).unwrap();
        let exact = sigma2_w(lambda).unwrap();
        let chk = sigma2_general_checked(&spec, C2_PATHS, 64, &seed(200 + i as u64)).unwrap();
        let z = (chk.monte_carlo - exact) / chk.std_error;
        o.check(z.abs() <= C2_Z, format!("lambda {lambda}: z = {z:.2}"));
    }
    o
}

fn c3() -> Outcome {
    let mut o = Outcome::new();
    let bm = ProcessSpec::brownian();
    let grid = GridRule::Fixed { intervals: 64 };
    let opts = McOptions::new(C3_PROB_PATHS, grid, seed(300)).allow_rare(true);
    for p in estimate_probs(&bm, &NormSpec::sup(), &C3_EPS, &opts).unwrap() {
        let exact = brownian_sup_smallball_exact(p.epsilon).unwrap();
        let dev = (p.p_hat - exact).abs();
        let tol = C3_SE * p.stderr + p.refinement_gap;
        o.check(
            dev <= tol,
            format!("eps {}: |p̂ − p| = {dev:.2e} ≤ {tol:.2e}", p.epsilon),
        );
    }
    let kopts = McOptions::new(C3_KAPPA_PATHS, grid, seed(301));
    let r = estimate_kappa(&bm, &NormSpec::sup(), None, &kopts, FitModel::PowerOnly).unwrap();
    let target = PI * PI / 8.0;
    o.check(
        rel(r.kappa_hat, target) <= C3_KAPPA_REL,
        format!("kappa_hat {:.4} vs {target:.4}", r.kappa_hat),
    );
    o
}

fn c4() -> Outcome {
    let mut o = Outcome::new();
    let ib = ProcessSpec::integrated_brownian();
    let opts = McOptions::new(C4_PATHS, GridRule::default(), seed(400));
    let r = scaling_check(&ib, &C4_ALPHAS, &opts, FitModel::PowerWithLog).unwrap();
    let k0 = r.rows[0].kappa_hat;
    o.check(
        (C4_BAND[0]..=C4_BAND[1]).contains(&k0),
        format!("kappa_hat(0) = {k0:.4}"),
    );
    for (row, alpha) in r.rows[1..].iter().zip(C4_ALPHAS) {
        let target = 1.0 / (1.0 - 2.0 * alpha / 3.0);
        assert_eq!(row.alpha, alpha);
        o.check(
            rel(row.ratio, target) <= C4_RATIO_REL,
            format!("alpha {alpha}: ratio {:.4} vs {target:.4}", row.ratio),
        );
    }
    o
}

fn c5() -> Outcome {
    let mut o = Outcome::new();
    let cases: [(f64, Vec<f64>); 4] = [
        (0.5, vec![]),
        (0.7, vec![]),
        (0.5, vec![0.0]),
        (0.5, vec![0.5]),
    ];
    for (h, w) in cases {
        let spec = ProcessSpec::fbm(h)
            .unwrap()
            .with_weights(w.clone())
            .unwrap();
        let q = StationaryCovariance::new(&spec)
            .unwrap()
            .long_run_variance_quadrature(Tolerance::new(1e-13, 1e-9))
            .unwrap()
            .value;
        let closed = sigma_tilde2_b(h, 0.0, &w).unwrap();
        o.check(
            rel(q, closed) <= C5_REL,
            format!("H {h}, alpha {w:?}: rel {:.1e}", rel(q, closed)),
        );
    }
    o
}

fn c6() -> Outcome {
    let mut o = Outcome::new();
    for alpha in [0.0, 0.5, 1.0] {
        let spec = ProcessSpec::integrated_brownian()
            .with_weights(vec![alpha])
            .unwrap();
        let v = sigma2_general(&spec).unwrap();
        let target = 2.0 / ((2.0 - alpha) * (3.0 - 2.0 * alpha));
        o.check(
            rel(v, target) <= C6_REL,
            format!("alpha {alpha}: rel {:.1e}", rel(v, target)),
        );
    }
    for h in [0.0, 1.0, 5.0] {
        let d = (r_lambda(0.5, h).unwrap() - (-h / 2.0).exp()).abs();
        o.check(d <= C6_R_ABS, format!("r_lambda(0.5, {h}): {d:.1e}"));
    }
    o
}

fn c7() -> Outcome {
    let mut o = Outcome::new();
    let exp = LilExperiment::new(
        ProcessSpec::brownian(),
        Theorem::IntegralLiminf,
        C7_REPLICAS,
        seed(700),
    );
    assert_eq!(exp.log_horizons.last(), Some(&C7_HORIZON));
    let r = run_integral_liminf(&exp).unwrap();
    assert!((r.theory_constant - PI / 2f64.sqrt()).abs() < 1e-12);
    let m = r.final_median_ratio();
    o.check((m - 1.0).abs() <= C7_BAND, format!("median ratio {m:.4}"));
    o.check(
        r.running_min_nonincreasing,
        "running minima nonincreasing".into(),
    );
    o
}

fn c8() -> Outcome {
    let mut o = Outcome::new();
    let cases = [
        (ProcessSpec::brownian(), 1.0),
        (
            ProcessSpec::integrated_brownian()
                .with_weights(vec![0.5])
                .unwrap(),
            (2.0f64 / 3.0).sqrt(),
        ),
    ];
    for (i, (spec, sigma)) in cases.into_iter().enumerate() {
        let exp = LilExperiment::new(spec, Theorem::SupLil, C8_REPLICAS, seed(800 + i as u64));
        let r = run_sup_lil(&exp).unwrap();
        assert!((r.theory_constant - sigma).abs() < 1e-9);
        let m = r.final_median_ratio();
        o.check(
            (C8_BAND[0]..=C8_BAND[1]).contains(&m),
            format!("case {i}: median ratio {m:.4}"),
        );
        o.check(
            r.convergence_rho > 0.0 && r.convergence_p_value < C8_TREND_P,
            format!(
                "case {i}: trend rho {:.3}, p {:.1e}",
                r.convergence_rho, r.convergence_p_value
            ),
        );
    }
    o
}

fn c9() -> Outcome {
    let mut o = Outcome::new();
    let mut worst = 0.0f64;
    for i in 0..=20 {
        for j in 0..=20 {
            let p =
                UrnParams::new(0.02 + 0.048 * i as f64, 0.02 + 0.048 * j as f64, 1.0, 1.0).unwrap();
            let k = rpw_params(&p).unwrap();
            worst = worst.max((k.rho * k.rho * k.sigma1_sq + k.sigma2_sq - k.sigma1_sq).abs());
        }
    }
    o.check(worst <= C9_IDENTITY, format!("identity error {worst:.1e}"));
    let mut cps = default_checkpoints();
    assert!(cps.contains(&C9_N));
    cps.sort_unstable();
    for (k, (pw, pb)) in [(0.5, 0.5), (0.7, 0.4)].into_iter().enumerate() {
        let p = UrnParams::new(pw, pb, 1.0, 1.0).unwrap();
        let r = lil_diagnostics(&p, C9_REPLICAS, &cps, &seed(900 + k as u64)).unwrap();
        let i = r.checkpoints.iter().position(|&n| n == C9_N).unwrap();
        let v = (1.0 - pb) / ((1.0 - pw) + (1.0 - pb));
        let (m, se) = (r.mean_y_over_n[i], r.se_y_over_n[i]);
        o.check(
            (m - v).abs() <= C9_SE * se,
            format!("p ({pw}, {pb}): Y_n/n {m:.6} ± {se:.1e} vs {v:.6}"),
        );
        if pw == pb {
            let c = r.median_chung_y_ratio;
            let sigma1 = 0.5;
            assert!((r.constants.chung - sigma1 * PI / 8f64.sqrt()).abs() < 1e-15);
            o.check(
                (c - 1.0).abs() <= C9_CHUNG_BAND,
                format!("Chung median ratio {c:.4}"),
            );
        }
    }
    o
}

fn c10() -> Outcome {
    let mut o = Outcome::new();
    let grid = Arc::new(TimeGrid::uniform(0.0, 1.0, C10_POINTS).unwrap());
    let sup = |a: &GridPath, b: &GridPath| {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let w = GridPath::from_fn(Arc::clone(&grid), |t| t, Some(1.0)).unwrap();
    for (g1, g2) in [(0.5, 0.5), (0.3, 1.2)] {
        let lhs = riemann_liouville(&riemann_liouville(&w, g2).unwrap(), g1).unwrap();
        let d = sup(&lhs, &riemann_liouville(&w, g1 + g2).unwrap());
        o.check(d <= C10_SUP, format!("semigroup ({g1}, {g2}): {d:.1e}"));
    }
    let f = GridPath::from_fn(Arc::clone(&grid), |t| (2.0 * t).cos() + t, Some(0.0)).unwrap();
    for m in [1, 3] {
        let d = sup(
            &compose_weighted(&f, &vec![0.0; m]).unwrap(),
            &integrate_m(&f, m).unwrap(),
        );
        o.check(d <= C10_SUP, format!("J_{{{m},0}} = I_{m}: {d:.1e}"));
    }
    o
}

fn c11() -> Outcome {
    let mut o = Outcome::new();
    let ids: Vec<u8> = (1..=10).collect();
    let a = with_workers(1, || verify::run(Profile::Smoke, seed(1100), &ids));
    let b = with_workers(2, || verify::run(Profile::Smoke, seed(1100), &ids));
    let (ja, jb) = (
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap(),
    );
    o.check(
        ja == jb && a.summary() == b.summary(),
        format!("{} JSON bytes, 1 vs 2 workers", ja.len()),
    );
    o
}

#[test]
fn acceptance_criteria() {
    type Criterion = (u8, fn() -> Outcome, Option<f64>);
    let criteria: [Criterion; 11] = [
        (1, c1, Some(C1_BUDGET)),
        (2, c2, Some(C2_BUDGET)),
        (3, c3, Some(C3_BUDGET)),
        (4, c4, Some(C4_BUDGET)),
        (5, c5, Some(C5_BUDGET)),
        (6, c6, None),
        (7, c7, Some(C7_BUDGET)),
        (8, c8, None),
        (9, c9, Some(C9_BUDGET)),
        (10, c10, Some(C10_BUDGET)),
        (11, c11, None),
    ];
    let mut failed = vec![];
    for (id, run, budget) in criteria {
        let t0 = Instant::now();
        let mut o = run();
        let secs = t0.elapsed().as_secs_f64();
        if let Some(b) = budget {
            o.check(secs <= b, format!("{secs:.1} s of {b} s"));
        }
        println!(
            "{} criterion {id:>2}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.notes.join("; ")
        );
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
