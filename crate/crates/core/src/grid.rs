//! Time grids and sampled trajectories.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    Geometric,
    Explicit,
}

/// Strictly increasing, non-negative sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    kind: GridKind,
}

const UNIFORM_RTOL: f64 = 1e-9;

impl TimeGrid {
    /// `n` equal intervals on `[t0, t1]`, i.e. `n + 1` points.
    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 || !(t1 > t0) || t0 < 0.0 || !t1.is_finite() {
            return Err(Error::Grid(format!(
                "uniform grid needs 0 <= t0 < t1 and n >= 1, got [{t0}, {t1}], n={n}"
            )));
        }
        let h = (t1 - t0) / n as f64;
        let mut points: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * h).collect();
        points[n] = t1;
        Ok(Self {
            points,
            kind: GridKind::Uniform,
        })
    }

    /// `t_k = t0 · ratio^k`, `k = 0..n_points`.
    pub fn geometric(t0: f64, ratio: f64, n_points: usize) -> Result<Self> {
        if !(t0 > 0.0) || !(ratio > 1.0) || n_points == 0 {
            return Err(Error::Grid(format!(
                "geometric grid needs t0 > 0, ratio > 1, got t0={t0}, ratio={ratio}"
            )));
        }
        let lr = ratio.ln();
        let points: Vec<f64> = (0..n_points).map(|k| t0 * (k as f64 * lr).exp()).collect();
        if !points.iter().all(|p| p.is_finite()) {
            return Err(Error::Grid("geometric grid overflows f64".into()));
        }
        Ok(Self {
            points,
            kind: GridKind::Geometric,
        })
    }

    pub fn explicit(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        if !points.iter().all(|p| p.is_finite()) || points[0] < 0.0 {
            return Err(Error::Grid(
                "grid points must be finite and start at t >= 0".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid(
                "grid points must be strictly increasing".into(),
            ));
        }
        let kind = if points.len() >= 2 && is_uniform(&points) {
            GridKind::Uniform
        } else {
            GridKind::Explicit
        };
        Ok(Self { points, kind })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn starts_at_zero(&self) -> bool {
        self.points[0] == 0.0
    }

    /// Spacing of a uniform grid.
    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            GridKind::Uniform if self.len() >= 2 => {
                Some((self.last() - self.first()) / (self.len() - 1) as f64)
            }
            _ => None,
        }
    }

    /// Ratio of a geometric grid (also detected for explicit grids).
    pub fn ratio(&self) -> Option<f64> {
        if self.len() < 2 || self.points[0] <= 0.0 {
            return None;
        }
        let r = (self.last() / self.first()).powf(1.0 / (self.len() - 1) as f64);
        let ok = self
            .points
            .windows(2)
            .all(|w| ((w[1] / w[0]) / r - 1.0).abs() < UNIFORM_RTOL.max(1e-12 * self.len() as f64));
        ok.then_some(r)
    }

    /// Every `step`-th point, starting from the first.
    pub fn subsample(&self, step: usize) -> Self {
        let points: Vec<f64> = self.points.iter().copied().step_by(step.max(1)).collect();
        let kind = if self.kind == GridKind::Explicit {
            GridKind::Explicit
        } else {
            self.kind
        };
        Self { points, kind }
    }

    pub fn require_uniform_from_zero(&self, what: &str) -> Result<f64> {
        match self.spacing() {
            Some(h) if self.starts_at_zero() => Ok(h),
            _ => Err(Error::Grid(format!(
                "{what} requires a uniform grid starting at t = 0"
            ))),
        }
    }
}

fn is_uniform(points: &[f64]) -> bool {
    let n = points.len() - 1;
    let h = (points[n] - points[0]) / n as f64;
    points
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= UNIFORM_RTOL * h.abs().max(f64::MIN_POSITIVE))
}

/// A sampled trajectory. `index` is the declared self-similarity index of the
/// process the values were drawn from, when known; operators update it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
    index: Option<f64>,
}

impl GridPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>, index: Option<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "path has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: format!("path value at grid index {i} is not finite"),
                residual: values[i],
            });
        }
        Ok(Self {
            grid,
            values,
            index,
        })
    }

    /// Evaluate a deterministic function on a grid.
    pub fn from_fn<F: Fn(f64) -> f64>(
        grid: Arc<TimeGrid>,
        f: F,
        index: Option<f64>,
    ) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values, index)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index(&self) -> Option<f64> {
        self.index
    }

    pub fn with_index(mut self, index: Option<f64>) -> Self {
        self.index = index;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Max of |value| over the grid.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
            index: self.index,
        }
    }
}
