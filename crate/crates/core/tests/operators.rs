mod common;

use std::sync::Arc;

use fraclab::mc::map_paths;
use fraclab::operators::*;
use fraclab::paths::{FbmMethod, FbmSampler, PathSampler};
use fraclab::stats;
use fraclab::{Error, GridPath, ProcessSampler, ProcessSpec, SeedSpec, TimeGrid};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, 1.0, n).unwrap())
}

fn path<F: Fn(f64) -> f64>(g: &Arc<TimeGrid>, f: F, index: Option<f64>) -> GridPath {
    GridPath::from_fn(g.clone(), f, index).unwrap()
}

fn sup_err<F: Fn(f64) -> f64>(p: &GridPath, f: F) -> f64 {
    p.times()
        .iter()
        .zip(p.values())
        .fold(0.0, |m, (&t, &v)| m.max((v - f(t)).abs()))
}

#[test]
fn plain_integration() {
    let g = grid(100);
    let out = integrate(&path(&g, |_| 1.0, Some(0.0))).unwrap();
    assert!(sup_err(&out, |t| t) < 1e-14);
    assert_eq!(out.values()[0], 0.0);
    let out = integrate(&path(&g, |t| t, Some(1.0))).unwrap();
    assert!((out.values()[100] - 0.5).abs() < 1e-12);
}

#[test]
fn iterated_integral_of_one() {
    // Trapezoid error for I_m(1) is O(h²); h = 2^-10.
    let g = grid(1024);
    let out = integrate_m(&path(&g, |_| 1.0, Some(0.0)), 3).unwrap();
    assert!(sup_err(&out, |t| t.powi(3) / 6.0) < 1e-6);
}

#[test]
fn weighted_integral_examples() {
    let g = grid(1 << 14);
    let out = weighted_integral(&path(&g, |t| t, Some(1.0)), 0.0, None).unwrap();
    assert!(sup_err(&out, |t| t * t / 2.0) < 1e-12);
    let out = weighted_integral(&path(&g, |t| t.powf(1.5), Some(1.5)), 1.0, None).unwrap();
    assert!(sup_err(&out, |t| t.powf(1.5) / 1.5) < 1e-6);
    assert_eq!(out.index(), Some(1.5));
}

#[test]
fn weighted_integral_of_brownian_converges() {
    // Same driving noise on 2^18 and 2^14 points: the coarse grid is every 16th point.
    let fine = grid(1 << 18);
    let coarse = grid(1 << 14);
    let sampler = FbmSampler::new(0.5, fine.clone(), FbmMethod::Circulant).unwrap();
    for k in 0..5 {
        let b = sampler.sample(&SeedSpec::new(21, 0), k);
        let sub: Vec<f64> = b.values().iter().step_by(16).copied().collect();
        let bc = GridPath::new(coarse.clone(), sub, Some(0.5)).unwrap();
        let r = weighted_integral(&b, 0.5, None).unwrap().values()[1 << 18];
        let c = weighted_integral(&bc, 0.5, None).unwrap().values()[1 << 14];
        assert!((c - r).abs() <= 1e-3 * r.abs(), "path {k}: {c} vs {r}");
    }
}

#[test]
fn composed_weighted_examples() {
    let g = grid(1 << 14);
    // J_{m,0} = I_m
    let w = path(&g, |t| (2.0 * t).cos() + t, Some(0.0));
    let j = compose_weighted(&w, &[0.0, 0.0, 0.0]).unwrap();
    let i = integrate_m(&w, 3).unwrap();
    assert!(sup_err(&j, |_| 0.0) > 0.0);
    let diff = j
        .values()
        .iter()
        .zip(i.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-4, "J_3,0 vs I_3: {diff}");

    let out = compose_weighted(&path(&g, |t| t * t, Some(2.0)), &[1.0]).unwrap();
    assert!(sup_err(&out, |t| t * t / 2.0) < 1e-8);
    let out = compose_weighted(&path(&g, |t| t, Some(1.0)), &[0.5, -1.0]).unwrap();
    assert!(sup_err(&out, |t| t.powf(3.5) / (1.5 * 3.5)) < 1e-8);
    assert!((out.index().unwrap() - 3.5).abs() < 1e-15);
}

#[test]
fn chain_violation_names_stage() {
    let g = grid(16);
    let w = path(&g, |t| t.sqrt(), Some(0.5));
    match compose_weighted(&w, &[0.0, 0.0, 3.6]) {
        Err(Error::Admissibility { stage, .. }) => assert_eq!(stage, 3),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn riemann_liouville_examples() {
    let g = grid(1 << 14);
    let w = path(&g, |t| (3.0 * t).sin() + 1.0, Some(0.0));
    let a = riemann_liouville(&w, 1.0).unwrap();
    let b = integrate(&w).unwrap();
    let d = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(d < 1e-12, "I_1 vs I: {d}");

    let one = path(&g, |_| 1.0, Some(0.0));
    let half = riemann_liouville(&one, 0.5).unwrap();
    assert!(sup_err(&half, |t| 2.0 * (t / std::f64::consts::PI).sqrt()) < 1e-4);
    assert!(riemann_liouville(&one, 0.0).is_err());
    assert!(riemann_liouville(&one, -1.0).is_err());
}

#[test]
fn semigroup_law() {
    let g = grid(1 << 14);
    let w = path(&g, |t| t, Some(1.0));
    for (g1, g2) in [(0.5, 0.5), (0.3, 1.2), (0.7, 0.25)] {
        let lhs = riemann_liouville(&riemann_liouville(&w, g2).unwrap(), g1).unwrap();
        let rhs = riemann_liouville(&w, g1 + g2).unwrap();
        let d = lhs
            .values()
            .iter()
            .zip(rhs.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-4, "I_{g1}∘I_{g2}: {d}");
        let exact = |t: f64| t.powf(1.0 + g1 + g2) / gamma(2.0 + g1 + g2);
        assert!(sup_err(&rhs, exact) < 1e-4);
    }
}

#[test]
fn refinement_orders() {
    // Trapezoid on a smooth function: error ratio ≈ 4 per halving.
    let f = |t: f64| (2.0 * t).exp();
    let exact = ((2.0f64).exp() - 1.0) / 2.0;
    let e = |n| (integrate(&path(&grid(n), f, None)).unwrap().values()[n] - exact).abs();
    assert!(e(256) / e(512) > 3.8);
    // Singular kernel, smooth integrand: product integration keeps order ≥ 1.
    let exact = |t: f64| t.powf(1.5) / gamma(2.5) + t.powf(0.5) / gamma(1.5);
    let e = |n: usize| {
        let p = path(&grid(n), |t| t + 1.0, None);
        (riemann_liouville(&p, 0.5).unwrap().values()[n] - exact(1.0))
            .abs()
            .max(1e-300)
    };
    assert!(e(128) / e(256) > 2.0 || e(256) < 1e-13);
    // Singular weight s^{-3/4}, smooth integrand, local model on the first cell.
    let e = |n: usize| {
        let p = path(&grid(n), |t| 1.0 + t + t * t, Some(0.0));
        let v = weighted_integral(&p, 0.75, None).unwrap().values()[n];
        (v - (1.0 / 0.25 + 1.0 / 1.25 + 1.0 / 2.25)).abs()
    };
    assert!(e(256) / e(512) > 2.0, "{} {}", e(256), e(512));
}

#[test]
fn normalisation_examples() {
    let g = grid(64);
    let p = path(&g, |t| t * t, Some(2.0));
    let n = normalize_self_similar(&p, 1.0).unwrap();
    assert!(sup_err(&n, |t| t) < 1e-15);
    assert_eq!(normalize_self_similar(&p, 0.0).unwrap(), p);
    assert!(matches!(
        normalize_self_similar(&p, 2.5),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn normalised_fbm_is_finite() {
    let g = grid(1024);
    let s = FbmSampler::new(0.7, g, FbmMethod::Circulant).unwrap();
    let sups = map_paths(&s, &SeedSpec::new(22, 0), 0..10_000, |_, v| {
        let p = GridPath::new(s.grid().clone(), v.to_vec(), Some(0.7)).unwrap();
        normalize_self_similar(&p, 0.5).unwrap().sup_abs()
    });
    assert!(sups.iter().all(|x| x.is_finite()));
}

#[test]
fn stationary_transform_of_processes() {
    // Brownian motion on a geometric grid: U has r(h) = e^{-|h|/2}.
    let ratio: f64 = 1.05;
    let g = Arc::new(TimeGrid::geometric(1.0, ratio, 200).unwrap());
    let bm = FbmSampler::new(0.5, g.clone(), FbmMethod::Cholesky).unwrap();
    let lag: Vec<(f64, f64)> = map_paths(&bm, &SeedSpec::new(23, 0), 0..50_000, |_, v| {
        let p = GridPath::new(g.clone(), v.to_vec(), Some(0.5)).unwrap();
        let u = stationary_transform(&p, 0.5).unwrap();
        (u.path.values()[100], u.path.values()[101])
    });
    let a: Vec<f64> = lag.iter().map(|x| x.0).collect();
    let b: Vec<f64> = lag.iter().map(|x| x.1).collect();
    let (c, se) = common::cov_and_se(&a, &b);
    common::assert_within_se("OU lag-1", c, se, (-ratio.ln() / 2.0).exp(), 4.0);

    // fBm H = 0.7: Var U(s) = 1 at every s.
    let fb = FbmSampler::new(0.7, g.clone(), FbmMethod::Cholesky).unwrap();
    let vals: Vec<[f64; 3]> = map_paths(&fb, &SeedSpec::new(24, 0), 0..50_000, |_, v| {
        let p = GridPath::new(g.clone(), v.to_vec(), Some(0.7)).unwrap();
        let u = stationary_transform(&p, 0.7).unwrap();
        [0, 99, 199].map(|i| u.path.values()[i])
    });
    for k in 0..3 {
        let xs: Vec<f64> = vals.iter().map(|r| r[k]).collect();
        let (v, se) = common::var_and_se(&xs);
        common::assert_within_se("Var U", v, se, 1.0, 4.0);
    }
    let uni = path(&grid(8), |t| t, None);
    assert!(matches!(
        stationary_transform(&uni, 1.0),
        Err(Error::Grid(_))
    ));
}

#[test]
fn self_similarity_propagates_through_chain() {
    let spec = ProcessSpec::fbm(0.7)
        .unwrap()
        .with_weights(vec![0.5])
        .unwrap();
    let tau = spec.self_similarity_index();
    let g = grid(1024);
    let s = ProcessSampler::new(&spec, g).unwrap();
    let idx = [128usize, 256, 512, 768, 1024];
    let rows: Vec<[f64; 5]> = map_paths(&s, &SeedSpec::new(25, 0), 0..100_000, |_, v| {
        idx.map(|i| v[i])
    });
    let design: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| vec![1.0, (i as f64 / 1024.0).ln()])
        .collect();
    let y: Vec<f64> = (0..5)
        .map(|k| {
            let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            0.5 * common::var_and_se(&xs).0.ln()
        })
        .collect();
    let fit = stats::least_squares(&design, &y, None).unwrap();
    assert!(
        (fit.coef[1] - tau).abs() < 0.02,
        "slope {} vs {tau}",
        fit.coef[1]
    );
}

fn lin_check(op: &dyn PathOperator, x: &[f64], y: &[f64], a: f64, b: f64) {
    let mut ox = Vec::new();
    let mut oy = Vec::new();
    let mut oz = Vec::new();
    let z: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
    op.apply_values(x, &mut ox);
    op.apply_values(y, &mut oy);
    op.apply_values(&z, &mut oz);
    let scale =
        ox.iter().chain(&oy).fold(1.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs() + 1.0);
    for i in 0..z.len() {
        let d = (oz[i] - (a * ox[i] + b * oy[i])).abs();
        assert!(d <= 1e-12 * scale, "index {i}: {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn operators_are_linear(
        xs in prop::collection::vec(-5.0f64..5.0, 200),
        ys in prop::collection::vec(-5.0f64..5.0, 200),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        gam in 0.05f64..2.5,
        alpha in -1.0f64..1.4,
    ) {
        let g = Arc::new(TimeGrid::uniform(0.0, 1.0, 199).unwrap());
        lin_check(&Integrate::new(g.clone()).unwrap(), &xs, &ys, a, b);
        lin_check(&RiemannLiouville::new(g.clone(), gam).unwrap(), &xs, &ys, a, b);
        lin_check(&WeightedIntegral::new(g.clone(), alpha, Some(0.5)).unwrap(), &xs, &ys, a, b);
        lin_check(&ComposedWeighted::new(g, &[alpha, 0.3], Some(0.5)).unwrap(), &xs, &ys, a, b);
    }
}
