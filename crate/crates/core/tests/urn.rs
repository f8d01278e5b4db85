use std::f64::consts::PI;

use fraclab::urn::*;
use fraclab::SeedSpec;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn seed() -> SeedSpec {
    SeedSpec::new(77, 3)
}

#[test]
fn constants_for_worked_examples() {
    let c = rpw_params(&UrnParams::new(0.5, 0.5, 1.0, 1.0).unwrap()).unwrap();
    assert_eq!(
        (c.rho, c.v, c.sigma1_sq, c.sigma2_sq),
        (0.0, 0.5, 0.25, 0.25)
    );
    assert!((c.lil_y - 0.5).abs() < 1e-15);
    assert!((c.lil_n - 3f64.sqrt() / 2.0).abs() < 1e-15);
    assert!((c.chung - 0.5 * PI / 8f64.sqrt()).abs() < 1e-15);
    assert!((c.chung - 0.5554).abs() < 1e-4);

    let c = rpw_params(&UrnParams::new(0.7, 0.4, 2.0, 3.0).unwrap()).unwrap();
    assert!((c.rho - 0.1).abs() < 1e-15);
    assert!((c.v - 2.0 / 3.0).abs() < 1e-15);
    assert!((c.sigma1_sq - 2.0 / 9.0).abs() < 1e-15);
    assert!((c.sigma2_sq - 0.22).abs() < 1e-15);
}

#[test]
fn variance_identity_over_parameter_sweep() {
    for i in 0..10 {
        for j in 0..10 {
            let p =
                UrnParams::new(0.05 + 0.09 * i as f64, 0.05 + 0.09 * j as f64, 1.0, 1.0).unwrap();
            let c = rpw_params(&p).unwrap();
            let lhs = c.rho * c.rho * c.sigma1_sq + c.sigma2_sq;
            assert!((lhs - c.sigma1_sq).abs() < 1e-12, "{p:?}");
            if p.p_w == p.p_b {
                assert!((c.v - 0.5).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn invalid_parameters_rejected() {
    assert!(UrnParams::new(1.0, 0.5, 1.0, 1.0).is_err());
    assert!(UrnParams::new(0.5, 0.0, 1.0, 1.0).is_err());
    assert!(UrnParams::new(0.5, 0.5, 0.0, 1.0).is_err());
    let p = UrnParams::new(0.9, 0.8, 1.0, 1.0).unwrap();
    let c = rpw_params(&p).unwrap();
    assert!(c.lil_y.is_nan());
    assert!(lil_diagnostics(&p, 4, &[1024, 2048], &seed()).is_err());
}

#[test]
fn trajectories_obey_the_dynamics() {
    let p = UrnParams::new(0.7, 0.4, 1.5, 2.5).unwrap();
    let t0 = simulate(&p, 0, &seed(), 0).unwrap();
    assert_eq!((t0.y, t0.n), (vec![1.5], vec![0]));
    let t = simulate(&p, 5_000, &seed(), 1).unwrap();
    assert_eq!(t.stages(), 5_000);
    for k in 1..=5_000 {
        let dy = t.y[k] - t.y[k - 1];
        assert!(dy == 0.0 || dy == 1.0);
        assert!(t.n[k] - t.n[k - 1] <= 1);
        // Black balls = total − white stays nondecreasing: conservation.
        let black = t.total_balls(k) - t.y[k];
        let prev = t.total_balls(k - 1) - t.y[k - 1];
        assert!(black - prev == 0.0 || black - prev == 1.0);
    }
    // Checkpoint runs replay the same random numbers.
    let rec = simulate_checkpoints(&p, &[10, 1000, 5000], &seed(), 1).unwrap();
    assert_eq!(rec.y, vec![t.y[10], t.y[1000], t.y[5000]]);
    assert_eq!(rec.n, vec![t.n[10], t.n[1000], t.n[5000]]);
}

#[test]
fn first_step_matches_exact_law() {
    let p = UrnParams::new(0.7, 0.4, 2.0, 3.0).unwrap();
    let n = 1_000_000u64;
    let whites: u64 = (0..n)
        .into_par_iter()
        .map(|r| (simulate(&p, 1, &seed(), r).unwrap().y[1] > p.w0) as u64)
        .sum();
    let prob = p.p_w * 2.0 / 5.0 + (1.0 - p.p_b) * 3.0 / 5.0;
    let expected = [n as f64 * prob, n as f64 * (1.0 - prob)];
    let observed = [whites as f64, (n - whites) as f64];
    let chi2: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let p_value = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "χ² = {chi2}, p = {p_value}");
}

#[test]
fn proportions_and_variance_converge() {
    for (pw, pb) in [(0.5, 0.5), (0.7, 0.4)] {
        let p = UrnParams::new(pw, pb, 1.0, 1.0).unwrap();
        let r = lil_diagnostics(&p, 400, &[1 << 12, 1_000_000], &seed()).unwrap();
        let v = r.constants.v;
        let (m, se) = (r.mean_y_over_n[1], r.se_y_over_n[1]);
        assert!((m - v).abs() < 3.0 * se, "Y_n/n = {m} ± {se} vs {v}");
        assert!(
            (r.variance_ratio[1] - 1.0).abs() < 0.2,
            "variance ratio {}",
            r.variance_ratio[1]
        );
    }
}

#[test]
fn symmetric_urn_lil_and_chung_statistics() {
    let p = UrnParams::new(0.5, 0.5, 1.0, 1.0).unwrap();
    let r = lil_diagnostics(&p, 100, &default_checkpoints(), &seed()).unwrap();
    assert!(r.warnings.is_empty());
    for row in &r.chung_y {
        assert!(row.windows(2).all(|w| w[1] <= w[0]));
    }
    for row in &r.lil_y {
        assert!(row.windows(2).all(|w| w[1] >= w[0]));
    }
    assert!(
        (r.median_chung_y_ratio - 1.0).abs() < 0.3,
        "{}",
        r.median_chung_y_ratio
    );
    assert!(
        (r.median_chung_n_ratio - 1.0).abs() < 0.3,
        "{}",
        r.median_chung_n_ratio
    );
    // Limsup statistics approach their constant from below at this depth.
    assert!(
        r.median_lil_y_ratio > 0.5 && r.median_lil_y_ratio < 1.2,
        "{}",
        r.median_lil_y_ratio
    );
    assert!(
        r.median_lil_n_ratio > 0.5 && r.median_lil_n_ratio < 1.2,
        "{}",
        r.median_lil_n_ratio
    );
    let csv = r.to_csv();
    assert!(csv.starts_with("n,replica,Y,N\n"));
    assert_eq!(csv.lines().count(), 1 + 100 * r.checkpoints.len());
}

#[test]
fn diagnostics_are_deterministic_across_workers() {
    let p = UrnParams::new(0.6, 0.45, 1.0, 2.0).unwrap();
    let a = fraclab::mc::with_workers(1, || {
        lil_diagnostics(&p, 8, &[1024, 4096], &seed()).unwrap()
    });
    let b = fraclab::mc::with_workers(3, || {
        lil_diagnostics(&p, 8, &[1024, 4096], &seed()).unwrap()
    });
    assert_eq!(a, b);
}
