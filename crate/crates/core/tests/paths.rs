mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{assert_within_se, cov_and_se, var_and_se};
use fraclab::mc::{map_paths, with_workers};
use fraclab::paths::*;
use fraclab::quad::{gauss_kronrod, Tolerance};
use fraclab::stats;
use fraclab::{Error, ProcessSpec, SeedSpec, TimeGrid};
use statrs::function::gamma::gamma;

fn unit_grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, 1.0, n).unwrap())
}

#[test]
fn brownian_increments_have_spacing_variance() {
    let grid = unit_grid(64);
    let s = FbmSampler::new(0.5, grid, FbmMethod::Circulant).unwrap();
    let seed = SeedSpec::new(1, 0);
    let incs: Vec<(f64, f64)> =
        map_paths(&s, &seed, 0..40_000, |_, v| (v[1] - v[0], v[40] - v[39]));
    let a: Vec<f64> = incs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = incs.iter().map(|p| p.1).collect();
    let (va, sa) = var_and_se(&a);
    assert_within_se("Var ΔB", va, sa, 1.0 / 64.0, 4.0);
    let (c, sc) = cov_and_se(&a, &b);
    assert_within_se("Cov of disjoint increments", c, sc, 0.0, 4.0);
}

#[test]
fn fbm_at_origin_is_zero() {
    let g = Arc::new(TimeGrid::explicit(vec![0.0]).unwrap());
    let p = sample_fbm(0.7, g, &SeedSpec::default(), 0, FbmMethod::Cholesky).unwrap();
    assert_eq!(p.values(), &[0.0]);
    let p = sample_fbm(
        0.3,
        unit_grid(16),
        &SeedSpec::default(),
        0,
        FbmMethod::Circulant,
    )
    .unwrap();
    assert_eq!(p.values()[0], 0.0);
}

#[test]
fn circulant_fbm_covariance_matches() {
    let h = 0.7;
    let grid = unit_grid(1023);
    let s = FbmSampler::new(h, grid.clone(), FbmMethod::Circulant).unwrap();
    let idx = [1usize, 100, 511, 1023];
    let rows: Vec<[f64; 4]> = map_paths(&s, &SeedSpec::new(2, 0), 0..100_000, |_, v| {
        idx.map(|i| v[i])
    });
    let t = grid.points();
    for a in 0..4 {
        for b in a..4 {
            let xa: Vec<f64> = rows.iter().map(|r| r[a]).collect();
            let xb: Vec<f64> = rows.iter().map(|r| r[b]).collect();
            let (c, se) = cov_and_se(&xa, &xb);
            let target = fbm_cov(h, t[idx[a]], t[idx[b]]).unwrap();
            assert_within_se(&format!("cov({}, {})", idx[a], idx[b]), c, se, target, 4.0);
        }
    }
}

#[test]
fn cholesky_and_circulant_agree_in_distribution() {
    let h = 0.3;
    let grid = unit_grid(256);
    let chol = FbmSampler::new(h, grid.clone(), FbmMethod::Cholesky).unwrap();
    let circ = FbmSampler::new(h, grid, FbmMethod::Circulant).unwrap();
    let seed = SeedSpec::new(3, 0);
    let sup = |_: u64, v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let a = map_paths(&chol, &seed, 0..10_000, sup);
    let b = map_paths(&circ, &seed.substream(1), 0..10_000, sup);
    let (_, p) = stats::ks_two_sample(&a, &b);
    assert!(p > 1e-3, "KS p = {p}");
}

#[test]
fn marginal_is_gaussian() {
    let s = FbmSampler::new(0.7, unit_grid(128), FbmMethod::Circulant).unwrap();
    let xs = map_paths(&s, &SeedSpec::new(4, 0), 0..100_000, |_, v| v[128]);
    let (_, p) = stats::ks_one_sample(&xs, stats::normal_cdf);
    assert!(p > 1e-3, "KS p = {p}");
}

#[test]
fn rl_variance_at_one() {
    // W_{3/2}(t) = ∫_0^t B, whose variance at 1 is 1/3.
    for (lambda, target) in [(0.5, 1.0), (1.0, 2.0 / PI), (1.5, 1.0 / 3.0)] {
        let s = RlSampler::new(lambda, unit_grid(1023), RlMethod::KernelConvolution).unwrap();
        let xs = map_paths(&s, &SeedSpec::new(5, 0), 0..100_000, |_, v| v[1023]);
        let (v, se) = var_and_se(&xs);
        assert_within_se(&format!("Var W_{lambda}(1)"), v, se, target, 4.0);
    }
}

#[test]
fn rl_cholesky_matches_covariance() {
    let lambda = 0.3;
    let grid = unit_grid(64);
    let s = RlSampler::new(lambda, grid.clone(), RlMethod::Cholesky).unwrap();
    let rows: Vec<(f64, f64)> =
        map_paths(&s, &SeedSpec::new(6, 0), 0..50_000, |_, v| (v[20], v[64]));
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (c, se) = cov_and_se(&a, &b);
    let target = rl_cov(lambda, grid.points()[20], 1.0, Tolerance::default()).unwrap();
    assert_within_se("Cov W(20/64), W(1)", c, se, target, 4.0);
    assert_eq!(s.sample(&SeedSpec::default(), 0).values()[0], 0.0);
}

#[test]
fn rl_cov_against_independent_quadrature() {
    // Kronrod on the raw kernel product with a split near the singular end.
    for lambda in [1.0, 1.5] {
        let g = gamma(lambda + 0.5);
        let e = gauss_kronrod(
            |u: f64| (1.0 - u).powf(2.0 * lambda - 1.0),
            0.0,
            1.0,
            Tolerance::new(1e-15, 1e-13),
        )
        .unwrap();
        let oracle = e.value / (g * g);
        let v = rl_cov(lambda, 1.0, 1.0, Tolerance::default()).unwrap();
        assert!((v - oracle).abs() < 1e-10, "λ={lambda}: {v} vs {oracle}");
    }
    assert!((rl_cov(1.5, 1.0, 1.0, Tolerance::default()).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

fn zh_exact_truncated_var(h: f64, t: f64, m: f64) -> f64 {
    // Var Z_H(t) over [−M, 0]: Γ^{-2} ∫_0^M ((t+x)^{H−½} − x^{H−½})² dx
    let a = h - 0.5;
    let g = gamma(h + 0.5);
    let tol = Tolerance::new(1e-15, 1e-12);
    let f = |x: f64| {
        let k = (t + x).powf(a) - x.powf(a);
        k * k
    };
    let head = fraclab::quad::tanh_sinh(|x, _, _| f(x), 0.0, 1.0, tol)
        .unwrap()
        .value;
    let tail = gauss_kronrod(f, 1.0, m, tol).unwrap().value;
    (head + tail) / (g * g)
}

#[test]
fn zh_truncation_behaviour() {
    let grid = unit_grid(8);
    let seed = SeedSpec::new(7, 0);
    // H = ½: identically zero.
    let p = sample_zh(0.5, grid.clone(), &seed, 0, 1.0, 10, 1e-6).unwrap();
    assert!(p.values().iter().all(|&v| v == 0.0));
    // insufficient truncation names the M it needs
    match ZhSampler::new(0.75, grid.clone(), 8.0, 100, 1e-3) {
        Err(Error::Parameter(msg)) => assert!(msg.contains("need M >="), "{msg}"),
        other => panic!("expected parameter error, got {:?}", other.err()),
    }
    let need = zh_required_truncation(0.75, 1.0, 1e-3);
    assert!((zh_tail_variance_bound(0.75, 1.0, need) - 1e-3).abs() < 1e-12);

    // M → 2M shifts the variance by exactly the analytic tail difference.
    let h = 0.75;
    let mut est = Vec::new();
    for m in [8.0, 16.0] {
        let s = ZhSampler::new(h, grid.clone(), m, 300, 1.0).unwrap();
        let xs = map_paths(&s, &seed.substream(m as u64), 0..100_000, |_, v| v[8]);
        let (v, se) = var_and_se(&xs);
        let exact = zh_exact_truncated_var(h, 1.0, m);
        assert_within_se(&format!("Var Z_H(1), M={m}"), v, se, exact, 4.0);
        est.push((v, se));
    }
    let diff = est[1].0 - est[0].0;
    let se = (est[0].1.powi(2) + est[1].1.powi(2)).sqrt();
    let target = zh_exact_truncated_var(h, 1.0, 16.0) - zh_exact_truncated_var(h, 1.0, 8.0);
    assert_within_se("Var shift 8→16", diff, se, target, 4.0);
}

#[test]
fn mandelbrot_van_ness_representation() {
    // a_H (W_H + Z_H) is a standard fBm: variance 1 at t = 1.
    let h = 0.75;
    let a_h = (gamma(2.0 * h + 1.0) * (PI * h).sin()).sqrt();
    let grid = unit_grid(16);
    let tol = 1e-3 * 0.05;
    let m = 1.01 * zh_required_truncation(h, 1.0, tol);
    let z = ZhSampler::new(h, grid.clone(), m, 400, tol).unwrap();
    let w = RlSampler::new(h, grid, RlMethod::KernelConvolution).unwrap();
    let seed = SeedSpec::new(8, 0);
    let zs = map_paths(&z, &seed.substream(1), 0..100_000, |_, v| v[16]);
    let ws = map_paths(&w, &seed.substream(2), 0..100_000, |_, v| v[16]);
    let xs: Vec<f64> = zs.iter().zip(&ws).map(|(z, w)| a_h * (z + w)).collect();
    let (v, se) = var_and_se(&xs);
    assert_within_se("Var a_H(W_H+Z_H)(1)", v, se, 1.0, 4.0);
}

#[test]
fn stationary_ou_lag_covariance() {
    let d = 0.1;
    let grid = Arc::new(TimeGrid::uniform(0.0, 12.7, 127).unwrap());
    let s = StationarySampler::new(|h: f64| (-h.abs() / 2.0).exp(), grid).unwrap();
    let rows: Vec<(f64, f64, f64)> = map_paths(&s, &SeedSpec::new(9, 0), 0..50_000, |_, v| {
        (v[60], v[61], v[0])
    });
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (l1, se) = cov_and_se(&a, &b);
    assert_within_se("lag-1 autocovariance", l1, se, (-d / 2.0f64).exp(), 4.0);
    let (v, se) = var_and_se(&c);
    assert_within_se("Var U(0)", v, se, 1.0, 4.0);
}

#[test]
fn stationary_white_noise() {
    let grid = unit_grid(31);
    let s = StationarySampler::new(|h: f64| if h == 0.0 { 1.0 } else { 0.0 }, grid).unwrap();
    let rows: Vec<(f64, f64)> =
        map_paths(&s, &SeedSpec::new(10, 0), 0..50_000, |_, v| (v[3], v[4]));
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (c, se) = cov_and_se(&a, &b);
    assert_within_se("white-noise lag 1", c, se, 0.0, 4.0);
    let (_, p) = stats::ks_one_sample(&a, stats::normal_cdf);
    assert!(p > 1e-3);
}

#[test]
fn stationary_rejects_bad_input() {
    let grid = unit_grid(31);
    assert!(matches!(
        StationarySampler::new(|h: f64| if h == 0.0 { 1.0 } else { 2.0 }, grid.clone()),
        Err(Error::Embedding { .. })
    ));
    let geo = Arc::new(TimeGrid::geometric(1.0, 1.1, 10).unwrap());
    assert!(matches!(
        StationarySampler::new(|_| 1.0, geo),
        Err(Error::Grid(_))
    ));
}

#[test]
fn paths_are_reproducible_under_any_worker_count() {
    let spec = ProcessSpec::fbm(0.3)
        .unwrap()
        .with_weights(vec![0.5])
        .unwrap();
    let s = ProcessSampler::new(&spec, unit_grid(500)).unwrap();
    let seed = SeedSpec::new(11, 4);
    let one = with_workers(1, || map_paths(&s, &seed, 0..64, |_, v| v.to_vec()));
    let three = with_workers(3, || map_paths(&s, &seed, 0..64, |_, v| v.to_vec()));
    assert_eq!(one, three);
    assert_eq!(s.sample(&seed, 17).values(), &one[17][..]);
    assert_ne!(one[0], one[1]);
}

#[test]
fn self_similarity_of_sampled_processes() {
    // X(2t)/2^τ has the law of X(t): compare at t = ½ on [0, 1] against t = 1 on [0, 2].
    let specs = [
        ProcessSpec::fbm(0.7).unwrap(),
        ProcessSpec::rl(1.5).unwrap(),
        ProcessSpec::integrated_brownian(),
    ];
    for spec in specs {
        let tau = spec.self_similarity_index();
        let g1 = unit_grid(512);
        let g2 = Arc::new(TimeGrid::uniform(0.0, 2.0, 512).unwrap());
        let s1 = ProcessSampler::new(&spec, g1).unwrap();
        let s2 = ProcessSampler::new(&spec, g2).unwrap();
        let a = map_paths(&s1, &SeedSpec::new(12, 0), 0..40_000, |_, v| v[256]);
        let b = map_paths(&s2, &SeedSpec::new(12, 1), 0..40_000, |_, v| {
            v[256] / 2f64.powf(tau)
        });
        let (va, sa) = var_and_se(&a);
        let (vb, sb) = var_and_se(&b);
        assert_within_se(
            &format!("self-similarity τ={tau}"),
            va - vb,
            (sa * sa + sb * sb).sqrt(),
            0.0,
            4.0,
        );
        let (ma, mb) = (stats::mean(&a), stats::mean(&b));
        let se = (stats::std_error(&a).powi(2) + stats::std_error(&b).powi(2)).sqrt();
        assert_within_se("self-similarity mean", ma - mb, se, 0.0, 4.0);
    }
}
