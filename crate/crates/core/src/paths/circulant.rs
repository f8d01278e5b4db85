//! Circulant embedding of a stationary Gaussian sequence.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Exact sampler for `n` consecutive values of a stationary sequence with
/// autocovariance `c_k`.
///
/// The Toeplitz covariance is embedded in a circulant of size `2N`,
/// `N = next_pow2(n − 1)`; its eigenvalues are the FFT of the first row.
/// With `Z` complex standard normal, the real part of `FFT(√(λ/2N)·Z)` has
/// exactly the target covariance.
pub struct CirculantEmbedding {
    n: usize,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

/// Relative size of negative eigenvalues treated as round-off and clipped.
pub const DEFAULT_CLIP: f64 = 1e-9;

impl CirculantEmbedding {
    /// `acov(k)` must be defined for `k = 0..=N_max`, where at most one
    /// doubling beyond `next_pow2(n − 1)` is attempted.
    pub fn new<F: Fn(usize) -> f64>(n: usize, acov: F, clip: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("cannot embed an empty sequence".into()));
        }
        let base = (n.saturating_sub(1)).max(1).next_power_of_two();
        let mut worst = (0.0, 0);
        for half in [base, 2 * base] {
            match Self::try_size(n, half, &acov, clip) {
                Ok(e) => return Ok(e),
                Err((min, size)) => worst = (min, size),
            }
        }
        Err(Error::Embedding {
            min_eigenvalue: worst.0,
            size: worst.1,
        })
    }

    fn try_size<F: Fn(usize) -> f64>(
        n: usize,
        half: usize,
        acov: &F,
        clip: f64,
    ) -> std::result::Result<Self, (f64, usize)> {
        let m = 2 * half;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|k| Complex::new(acov(if k <= half { k } else { m - k }), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().fold(0.0f64, |a, c| a.max(c.re));
        let min = row.iter().fold(f64::INFINITY, |a, c| a.min(c.re));
        if !(max > 0.0) || min < -clip * max {
            return Err((min, m));
        }
        let scale = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self { n, scale, fft })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.scale.len()
    }

    /// Write `n` values into `out`; `buf` is scratch.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        buf: &mut Vec<Complex<f64>>,
        out: &mut [f64],
    ) {
        buf.clear();
        buf.extend(self.scale.iter().map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(s * re, s * im)
        }));
        self.fft.process(buf);
        for (o, c) in out.iter_mut().zip(buf.iter()).take(self.n) {
            *o = c.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;

    #[test]
    fn white_noise_embeds_exactly() {
        let e =
            CirculantEmbedding::new(5, |k| if k == 0 { 1.0 } else { 0.0 }, DEFAULT_CLIP).unwrap();
        assert_eq!(e.embedding_size(), 8);
        let mut rng = SeedSpec::default().rng(0);
        let mut buf = Vec::new();
        let mut out = [0.0; 5];
        e.sample_into(&mut rng, &mut buf, &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_definite_sequence_is_rejected() {
        // c_1 > c_0 is not a covariance.
        let err = CirculantEmbedding::new(
            8,
            |k| {
                if k == 1 {
                    2.0
                } else if k == 0 {
                    1.0
                } else {
                    0.0
                }
            },
            DEFAULT_CLIP,
        );
        assert!(matches!(err, Err(Error::Embedding { .. })));
    }
}
