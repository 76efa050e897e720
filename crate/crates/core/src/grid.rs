//! Rectangular sampling grids and the row-major fields evaluated on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced axis including both endpoints. A single-point axis sits
/// at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let a = Self { min, max, points };
        a.validate()?;
        Ok(a)
    }

    pub fn single(value: f64) -> Self {
        Self { min: value, max: value, points: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidParameter("axis needs at least one point".into()));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParameter("axis bounds must be finite".into()));
        }
        if self.points > 1 && !(self.max > self.min) {
            return Err(Error::InvalidParameter(format!(
                "axis [{}, {}] with {} points is degenerate",
                self.min, self.max, self.points
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        if self.points > 1 {
            (self.max - self.min) / (self.points - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max.max(self.min)
        } else {
            self.min + self.step() * i as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

/// Two-axis grid over `(q, p)`, `(θ, t)` or `(θ, E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x: Axis,
    pub y: Axis,
}

impl PhaseGrid {
    pub fn new(x: Axis, y: Axis) -> Result<Self> {
        x.validate()?;
        y.validate()?;
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.points * self.y.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values on a [`PhaseGrid`], stored row-major: `values[i * ny + j]` belongs
/// to `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<f64>,
}

impl Field {
    /// Evaluates `f` at every grid node. Each node is computed independently.
    pub fn evaluate(grid: &PhaseGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        grid.x.validate()?;
        grid.y.validate()?;
        let x = grid.x.values();
        let y = grid.y.values();
        let mut values = Vec::with_capacity(x.len() * y.len());
        for &xi in &x {
            for &yj in &y {
                values.push(f(xi, yj));
            }
        }
        Ok(Self { x, y, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.y.len() + j]
    }

    /// Grid node with the largest value, as `(i, j, value)`. Ties go to the
    /// first node in row-major order.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let ny = self.y.len();
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        (best.0 / ny, best.0 % ny, best.1)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The slice at fixed `y[j]`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.x.len()).map(|i| self.get(i, j)).collect()
    }

    /// The slice at fixed `x[i]`.
    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.y.len();
        &self.values[i * ny..(i + 1) * ny]
    }
}
