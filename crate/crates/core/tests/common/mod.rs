#![allow(dead_code)]

use fraclab::stats;

/// Sample variance of zero-mean draws and the standard error of that estimate.
pub fn var_and_se(xs: &[f64]) -> (f64, f64) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    (stats::mean(&sq), stats::std_error(&sq))
}

/// Mean of `x·y` for zero-mean draws and its standard error.
pub fn cov_and_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let p: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    (stats::mean(&p), stats::std_error(&p))
}

pub fn assert_within_se(what: &str, est: f64, se: f64, target: f64, k: f64) {
    let z = (est - target) / se;
    assert!(
        z.abs() <= k,
        "{what}: estimate {est} ± {se} vs {target} (z = {z:.2})"
    );
}
