//! Curves sampled on a shared uniform grid, with the L2 geometry used
//! everywhere else in the crate.
//!
//! Integrals use the trapezoid rule on the grid. A one-point grid is allowed
//! and stands for a scalar observation: its single quadrature weight is 1, so
//! the L2 quantities reduce to ordinary absolute values and products.

use serde::{Deserialize, Serialize};

use crate::covariance::Basis;
use crate::error::{FunqError, Result};

/// Uniform grid `t_k = start + k * (end - start) / (count - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    start: f64,
    end: f64,
    count: usize,
}

impl Grid {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(FunqError::InvalidArgument(format!(
                "grid needs at least 2 points, got {count}"
            )));
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(FunqError::InvalidArgument(format!(
                "grid domain [{start}, {end}] is empty or not finite"
            )));
        }
        Ok(Self { start, end, count })
    }

    /// Degenerate one-point grid for scalar responses.
    pub fn point(at: f64) -> Self {
        Self {
            start: at,
            end: at,
            count: 1,
        }
    }

    /// `[0, 1]` with `count` points.
    pub fn unit(count: usize) -> Result<Self> {
        Self::new(0.0, 1.0, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_scalar(&self) -> bool {
        self.count == 1
    }

    /// Spacing between neighbouring points; 1 for a one-point grid.
    pub fn step(&self) -> f64 {
        if self.count == 1 {
            1.0
        } else {
            (self.end - self.start) / (self.count - 1) as f64
        }
    }

    pub fn point_at(&self, k: usize) -> f64 {
        if self.count == 1 {
            self.start
        } else if k + 1 == self.count {
            self.end
        } else {
            self.start + k as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point_at(k)).collect()
    }

    /// Trapezoid quadrature weights.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![1.0];
        }
        let dt = self.step();
        let mut w = vec![dt; self.count];
        w[0] = 0.5 * dt;
        w[self.count - 1] = 0.5 * dt;
        w
    }
}

/// A function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(FunqError::DimensionMismatch {
                expected: grid.count(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FunqError::InvalidArgument(format!(
                "curve value at index {bad} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.count()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.count()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.points().into_iter().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    pub fn scaled(&self, a: f64) -> Curve {
        Curve {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Curve) -> Result<()> {
        same_grid(self, other)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Curve, op: impl Fn(f64, f64) -> f64) -> Result<Curve> {
        same_grid(self, other)?;
        Ok(Curve {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }
}

/// Coordinates of a curve in a [`Basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefVector(pub Vec<f64>);

impl CoefVector {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn unit(d: usize, k: usize) -> Self {
        let mut c = vec![0.0; d];
        c[k] = 1.0;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|v| a * v).collect())
    }
}

impl From<Vec<f64>> for CoefVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn same_grid(f: &Curve, g: &Curve) -> Result<()> {
    if f.grid == g.grid {
        Ok(())
    } else {
        Err(FunqError::GridMismatch)
    }
}

/// Trapezoid approximation of the integral of `f * g`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    same_grid(f, g)?;
    Ok(weighted_dot(&f.grid, &f.values, &g.values))
}

pub(crate) fn weighted_dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let n = grid.count();
    if n == 1 {
        return a[0] * b[0];
    }
    let interior: f64 = (1..n - 1).map(|k| a[k] * b[k]).sum();
    grid.step() * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

pub fn norm(f: &Curve) -> f64 {
    weighted_dot(&f.grid, &f.values, &f.values).max(0.0).sqrt()
}

/// L2 metric; the covariate distance behind every kernel weight.
pub fn distance(f: &Curve, g: &Curve) -> Result<f64> {
    same_grid(f, g)?;
    Ok(raw_distance(&f.grid, &f.values, &g.values))
}

pub(crate) fn raw_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let n = grid.count();
    if n == 1 {
        return (a[0] - b[0]).abs();
    }
    let sq = |k: usize| {
        let d = a[k] - b[k];
        d * d
    };
    let interior: f64 = (1..n - 1).map(sq).sum();
    (grid.step() * (interior + 0.5 * (sq(0) + sq(n - 1))))
        .max(0.0)
        .sqrt()
}

pub fn project(f: &Curve, basis: &Basis) -> Result<CoefVector> {
    basis
        .functions()
        .iter()
        .map(|e| inner_product(f, e))
        .collect::<Result<Vec<_>>>()
        .map(CoefVector)
}

pub fn reconstruct(c: &CoefVector, basis: &Basis) -> Result<Curve> {
    if c.dim() != basis.dim() {
        return Err(FunqError::DimensionMismatch {
            expected: basis.dim(),
            found: c.dim(),
        });
    }
    let mut out = Curve::zeros(basis.grid());
    for (ck, e) in c.0.iter().zip(basis.functions()) {
        out.axpy(*ck, e)?;
    }
    Ok(out)
}
