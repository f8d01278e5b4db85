//! Integral operators on sampled paths: `I`, `I_m`, the Riemann–Liouville
//! integral `I_γ`, power-weighted integrals `J_α` and their compositions, plus
//! self-similar normalisation and the log-time stationary transform.
//!
//! Every operator is a linear map on the grid values. Its weights depend only on
//! the grid, so each one is compiled once into a plan and then applied to as
//! many paths as needed.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{param, Error, Result};
use crate::grid::{GridPath, TimeGrid};

/// A linear operator compiled for one grid.
pub trait PathOperator: Send + Sync {
    fn grid(&self) -> &Arc<TimeGrid>;
    /// `out` is resized to the grid length.
    fn apply_values(&self, input: &[f64], out: &mut Vec<f64>);
    /// Self-similarity index of the output given that of the input.
    fn output_index(&self, input: Option<f64>) -> Option<f64>;

    fn apply(&self, path: &GridPath) -> Result<GridPath> {
        check_same_grid(self.grid(), path)?;
        let mut out = Vec::new();
        self.apply_values(path.values(), &mut out);
        GridPath::new(
            Arc::clone(self.grid()),
            out,
            self.output_index(path.index()),
        )
    }
}

fn check_same_grid(grid: &Arc<TimeGrid>, path: &GridPath) -> Result<()> {
    if Arc::ptr_eq(grid, path.shared_grid()) || **grid == *path.grid() {
        Ok(())
    } else {
        Err(Error::Grid(
            "operator was compiled for a different grid".into(),
        ))
    }
}

fn require_origin(grid: &TimeGrid, what: &str) -> Result<()> {
    if grid.starts_at_zero() && !grid.is_empty() {
        Ok(())
    } else {
        Err(Error::Grid(format!(
            "{what} integrates from 0; the grid must start at t = 0"
        )))
    }
}

/// `∫_a^b x^p dx` for `0 <= a < b`, without cancellation when `a` is close to `b`.
fn power_integral(p: f64, a: f64, b: f64) -> f64 {
    let q = p + 1.0;
    if a == 0.0 {
        return b.powf(q) / q;
    }
    let l = (b / a).ln();
    if (q * l).abs() < 1e-300 {
        return a.powf(q) * l;
    }
    a.powf(q) * (q * l).exp_m1() / q
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Weights of the hat functions on `[a, b]` against `x^p`:
/// `(∫ x^p (b−x)/h dx, ∫ x^p (x−a)/h dx)` with `h = b − a`, `a >= 0`.
///
/// Exact moments near the origin; away from it `x^p` is smooth on the cell
/// and four-point Gauss–Legendre avoids the cancellation in `M1 − a·M0`.
fn hat_weights(p: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    if a < 16.0 * h {
        let m0 = power_integral(p, a, b);
        let m1 = power_integral(p + 1.0, a, b);
        ((b * m0 - m1) / h, (m1 - a * m0) / h)
    } else {
        let mid = 0.5 * (a + b);
        let (mut l, mut r) = (0.0, 0.0);
        for (x, w) in GL4 {
            let s = mid + 0.5 * h * x;
            let k = w * 0.5 * h * s.powf(p);
            l += k * 0.5 * (1.0 - x);
            r += k * 0.5 * (1.0 + x);
        }
        (l, r)
    }
}

/// Cumulative trapezoid rule: `I(w)(t) = ∫_0^t w(s) ds`.
pub struct Integrate {
    grid: Arc<TimeGrid>,
}

impl Integrate {
    pub fn new(grid: Arc<TimeGrid>) -> Result<Self> {
        require_origin(&grid, "I")?;
        Ok(Self { grid })
    }
}

impl PathOperator for Integrate {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn apply_values(&self, w: &[f64], out: &mut Vec<f64>) {
        let t = self.grid.points();
        out.clear();
        out.resize(t.len(), 0.0);
        for i in 1..t.len() {
            out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (w[i - 1] + w[i]);
        }
    }

    fn output_index(&self, input: Option<f64>) -> Option<f64> {
        input.map(|i| i + 1.0)
    }
}

/// `J_α(w)(t) = ∫_0^t s^{−α} w(s) ds`.
///
/// On cells away from 0 the path is interpolated linearly and `s^{−α}` is
/// integrated against the hat functions. On the first cell `[0, t₁]` the
/// path is modelled as `w(t₁)(s/t₁)^τ` when the local exponent `τ` is known,
/// which integrates exactly to `w(t₁)·t₁^{1−α}/(τ+1−α)`.
pub struct WeightedIntegral {
    grid: Arc<TimeGrid>,
    alpha: f64,
    first: FirstCell,
    /// `(left, right)` weights per cell, index `i` covering `[t_i, t_{i+1}]`.
    cells: Vec<(f64, f64)>,
}

enum FirstCell {
    PowerLaw(f64),
    Hat(f64, f64),
}

impl WeightedIntegral {
    pub fn new(grid: Arc<TimeGrid>, alpha: f64, local_exponent: Option<f64>) -> Result<Self> {
        require_origin(&grid, "J_α")?;
        if !alpha.is_finite() {
            return Err(param(format!(
                "weight exponent must be finite, got {alpha}"
            )));
        }
        let t = grid.points();
        let first = match local_exponent {
            Some(tau) => {
                if !(alpha < tau + 1.0) {
                    return Err(Error::Divergence(format!(
                        "∫_0 s^(−{alpha}) w(s) ds diverges for a path of local exponent {tau} (needs α < τ + 1)"
                    )));
                }
                let t1 = t.get(1).copied().unwrap_or(0.0);
                FirstCell::PowerLaw(if t1 > 0.0 {
                    t1.powf(1.0 - alpha) / (tau + 1.0 - alpha)
                } else {
                    0.0
                })
            }
            None => {
                if alpha >= 1.0 {
                    return Err(Error::Precondition(format!(
                        "J_α with α = {alpha} >= 1 needs the path's local exponent at 0"
                    )));
                }
                let (l, r) = if t.len() > 1 {
                    hat_weights(-alpha, 0.0, t[1])
                } else {
                    (0.0, 0.0)
                };
                FirstCell::Hat(l, r)
            }
        };
        let cells = t
            .windows(2)
            .skip(1)
            .map(|c| hat_weights(-alpha, c[0], c[1]))
            .collect();
        Ok(Self {
            grid,
            alpha,
            first,
            cells,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl PathOperator for WeightedIntegral {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn apply_values(&self, w: &[f64], out: &mut Vec<f64>) {
        let n = w.len();
        out.clear();
        out.resize(n, 0.0);
        if n < 2 {
            return;
        }
        out[1] = match self.first {
            FirstCell::PowerLaw(k) => k * w[1],
            FirstCell::Hat(l, r) => l * w[0] + r * w[1],
        };
        for (i, &(l, r)) in self.cells.iter().enumerate() {
            let j = i + 1;
            out[j + 1] = out[j] + l * w[j] + r * w[j + 1];
        }
    }

    fn output_index(&self, input: Option<f64>) -> Option<f64> {
        input.map(|i| i + 1.0 - self.alpha)
    }
}

/// Riemann–Liouville integral `I_γ w(t) = Γ(γ)^{-1} ∫_0^t (t−s)^{γ−1} w(s) ds`
/// by product integration: linear interpolation of `w`, exact integration of
/// the kernel against each hat function (singular cell at `s = t` included).
pub struct RiemannLiouville {
    grid: Arc<TimeGrid>,
    gamma: f64,
    kind: RlKind,
}

enum RlKind {
    /// `out_j = Σ_i W[j][i] w_i`, rows stored contiguously (triangular).
    Dense(Vec<Vec<f64>>),
    /// Uniform grid: `out_j = c·(a0_j w_0 + Σ_{i=1}^{j} b_{j−i} w_i)`.
    Toeplitz {
        scale: f64,
        a0: Vec<f64>,
        b: Vec<f64>,
        fft: Option<ToeplitzFft>,
    },
}

pub(crate) struct ToeplitzFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex<f64>>,
}

/// Below this many cells a direct Toeplitz product beats the FFT.
const DIRECT_LIMIT: usize = 96;

impl RiemannLiouville {
    pub fn new(grid: Arc<TimeGrid>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(param(format!("I_γ needs γ > 0, got {gamma}")));
        }
        require_origin(&grid, "I_γ")?;
        let t = grid.points();
        let n = t.len();
        let p = gamma - 1.0;
        let g = gamma_fn(gamma);
        let kind = match grid.spacing() {
            Some(h) if n > 2 => {
                let cells = n - 1;
                let mut b = Vec::with_capacity(cells);
                b.push(hat_weights(p, 0.0, 1.0).0);
                for k in 1..cells {
                    let kf = k as f64;
                    b.push(hat_weights(p, kf, kf + 1.0).0 + hat_weights(p, kf - 1.0, kf).1);
                }
                let mut a0 = vec![0.0; n];
                for (j, a) in a0.iter_mut().enumerate().skip(1) {
                    let jf = j as f64;
                    *a = hat_weights(p, jf - 1.0, jf).1;
                }
                let fft = (cells > DIRECT_LIMIT).then(|| ToeplitzFft::new(&b));
                RlKind::Toeplitz {
                    scale: h.powf(gamma) / g,
                    a0,
                    b,
                    fft,
                }
            }
            _ => {
                let mut rows = vec![Vec::new(); n];
                for (j, row) in rows.iter_mut().enumerate().skip(1) {
                    let tj = t[j];
                    let mut r = vec![0.0; j + 1];
                    for i in 0..j {
                        // u = t_j − s maps the cell to [t_j − t_{i+1}, t_j − t_i].
                        let (lu, ru) = hat_weights(p, tj - t[i + 1], tj - t[i]);
                        r[i] += ru / g;
                        r[i + 1] += lu / g;
                    }
                    *row = r;
                }
                RlKind::Dense(rows)
            }
        };
        Ok(Self { grid, gamma, kind })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl ToeplitzFft {
    pub(crate) fn new(b: &[f64]) -> Self {
        let len = (2 * b.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
        kernel.resize(len, Complex::new(0.0, 0.0));
        forward.process(&mut kernel);
        let s = 1.0 / len as f64;
        kernel.iter_mut().for_each(|k| *k *= s);
        Self {
            len,
            forward,
            inverse,
            kernel,
        }
    }

    /// Linear convolution `y_m = Σ_{k<=m} b_{m−k} x_k`, `m < x.len()`.
    pub(crate) fn convolve(&self, x: &[f64], y: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.len, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.kernel).for_each(|(a, k)| *a *= k);
        self.inverse.process(&mut buf);
        for (yi, c) in y.iter_mut().zip(&buf) {
            *yi = c.re;
        }
    }
}

impl PathOperator for RiemannLiouville {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn apply_values(&self, w: &[f64], out: &mut Vec<f64>) {
        let n = w.len();
        out.clear();
        out.resize(n, 0.0);
        match &self.kind {
            RlKind::Dense(rows) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = row.iter().zip(w).map(|(a, b)| a * b).sum();
                }
            }
            RlKind::Toeplitz { scale, a0, b, fft } => {
                if n < 2 {
                    return;
                }
                let x = &w[1..];
                let y = &mut out[1..];
                match fft {
                    Some(f) => f.convolve(x, y),
                    None => {
                        for m in 0..x.len() {
                            y[m] = (0..=m).map(|k| b[m - k] * x[k]).sum();
                        }
                    }
                }
                for j in 1..n {
                    out[j] = scale * (out[j] + a0[j] * w[0]);
                }
            }
        }
    }

    fn output_index(&self, input: Option<f64>) -> Option<f64> {
        input.map(|i| i + self.gamma)
    }
}

/// `J_{α_m} ∘ … ∘ J_{α_1}` with local exponents tracked stage by stage.
pub struct ComposedWeighted {
    grid: Arc<TimeGrid>,
    stages: Vec<WeightedIntegral>,
}

impl ComposedWeighted {
    pub fn new(grid: Arc<TimeGrid>, alphas: &[f64], input_index: Option<f64>) -> Result<Self> {
        let mut stages = Vec::with_capacity(alphas.len());
        let mut tau = input_index;
        for (i, &a) in alphas.iter().enumerate() {
            let stage = WeightedIntegral::new(Arc::clone(&grid), a, tau).map_err(|e| match e {
                Error::Divergence(detail) | Error::Precondition(detail) => Error::Admissibility {
                    stage: i + 1,
                    detail,
                },
                other => other,
            })?;
            tau = stage.output_index(tau);
            stages.push(stage);
        }
        require_origin(&grid, "J_{m,α}")?;
        Ok(Self { grid, stages })
    }
}

impl PathOperator for ComposedWeighted {
    fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn apply_values(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(w);
        let mut tmp = Vec::with_capacity(w.len());
        for s in &self.stages {
            s.apply_values(out, &mut tmp);
            std::mem::swap(out, &mut tmp);
        }
    }

    fn output_index(&self, input: Option<f64>) -> Option<f64> {
        self.stages.iter().fold(input, |i, s| s.output_index(i))
    }
}

/// Which operator to apply; the serialisable face of the plans above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    I,
    IM { m: usize },
    IGamma { gamma: f64 },
    JAlpha { alpha: f64 },
    JMAlpha { alphas: Vec<f64> },
}

impl OperatorSpec {
    pub fn apply(&self, path: &GridPath) -> Result<GridPath> {
        match self {
            OperatorSpec::I => integrate(path),
            OperatorSpec::IM { m } => integrate_m(path, *m),
            OperatorSpec::IGamma { gamma } => riemann_liouville(path, *gamma),
            OperatorSpec::JAlpha { alpha } => weighted_integral(path, *alpha, None),
            OperatorSpec::JMAlpha { alphas } => compose_weighted(path, alphas),
        }
    }
}

pub fn integrate(path: &GridPath) -> Result<GridPath> {
    Integrate::new(Arc::clone(path.shared_grid()))?.apply(path)
}

/// `I` applied `m` times.
pub fn integrate_m(path: &GridPath, m: usize) -> Result<GridPath> {
    let op = Integrate::new(Arc::clone(path.shared_grid()))?;
    let mut p = path.clone();
    for _ in 0..m {
        p = op.apply(&p)?;
    }
    Ok(p)
}

/// `J_α`; the local exponent defaults to the path's declared index.
pub fn weighted_integral(
    path: &GridPath,
    alpha: f64,
    local_exponent: Option<f64>,
) -> Result<GridPath> {
    WeightedIntegral::new(
        Arc::clone(path.shared_grid()),
        alpha,
        local_exponent.or(path.index()),
    )?
    .apply(path)
}

pub fn compose_weighted(path: &GridPath, alphas: &[f64]) -> Result<GridPath> {
    ComposedWeighted::new(Arc::clone(path.shared_grid()), alphas, path.index())?.apply(path)
}

pub fn riemann_liouville(path: &GridPath, gamma: f64) -> Result<GridPath> {
    RiemannLiouville::new(Arc::clone(path.shared_grid()), gamma)?.apply(path)
}

/// `t ↦ path(t) / t^exponent`, with the value at `t = 0` set to its limit 0.
pub fn normalize_self_similar(path: &GridPath, exponent: f64) -> Result<GridPath> {
    if exponent == 0.0 {
        return Ok(path.clone());
    }
    if path.grid().starts_at_zero() {
        match path.index() {
            Some(idx) if exponent < idx => {}
            Some(idx) => {
                return Err(Error::Precondition(format!(
                    "dividing by t^{exponent} is unbounded at 0 for a path of index {idx}"
                )))
            }
            None => {
                return Err(Error::Precondition(
                    "normalising at t = 0 needs the path's self-similarity index".into(),
                ))
            }
        }
    }
    let values = path
        .times()
        .iter()
        .zip(path.values())
        .map(|(&t, &v)| if t == 0.0 { 0.0 } else { v / t.powf(exponent) })
        .collect();
    GridPath::new(
        Arc::clone(path.shared_grid()),
        values,
        path.index().map(|i| i - exponent),
    )
}

/// A path in log-time. Grid point `s` corresponds to original time
/// `exp(offset + s)`.
#[derive(Debug, Clone)]
pub struct LogTimePath {
    pub path: GridPath,
    pub offset: f64,
}

/// `U(log t_k) = X(t_k) / t_k^τ` for a path on a geometric grid
/// `t_k = t_0 ρ^k`; the output grid is `k·log ρ`.
pub fn stationary_transform(path: &GridPath, tau: f64) -> Result<LogTimePath> {
    let grid = path.grid();
    let ratio = grid.ratio().ok_or_else(|| {
        Error::Grid("stationary transform needs a geometric grid t_k = t_0·ρ^k".into())
    })?;
    let t0 = grid.first();
    let step = ratio.ln();
    let n = grid.len();
    let s = if n == 1 {
        TimeGrid::explicit(vec![0.0])?
    } else {
        TimeGrid::uniform(0.0, step * (n - 1) as f64, n - 1)?
    };
    let values = path
        .times()
        .iter()
        .zip(path.values())
        .map(|(&t, &v)| v / t.powf(tau))
        .collect();
    Ok(LogTimePath {
        path: GridPath::new(Arc::new(s), values, Some(0.0))?,
        offset: t0.ln(),
    })
}
