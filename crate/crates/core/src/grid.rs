//! Uniform space-time lattices and the fields sampled on them.
//!
//! Values are stored row-major with shape `[steps, n_1, ..., n_N]` (time is the
//! slowest axis, the last spatial axis the fastest) and sit at cell centers.

use crate::error::{invalid, Error, Result};
use crate::geometry::SpaceTimePoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub corner: Vec<f64>,
    pub sides: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub cells: Vec<usize>,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(corner: Vec<f64>, sides: Vec<f64>, t0: f64, t1: f64, cells: Vec<usize>, steps: usize) -> Result<Self> {
        let g = Self { corner, sides, t0, t1, cells, steps };
        g.validate()?;
        Ok(g)
    }

    /// Box `[-half, half]^N × [t0, t1]` with `n` cells per axis.
    pub fn cube(dim: usize, half: f64, n: usize, t0: f64, t1: f64, steps: usize) -> Result<Self> {
        Self::new(vec![-half; dim], vec![2.0 * half; dim], t0, t1, vec![n; dim], steps)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.corner.len();
        if n == 0 {
            return invalid("grid needs at least one spatial axis");
        }
        if self.sides.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.sides.len() });
        }
        if self.cells.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.cells.len() });
        }
        let all = self.corner.iter().chain(&self.sides).chain([&self.t0, &self.t1]);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid spec".into()));
        }
        if self.sides.iter().any(|s| *s <= 0.0) || self.t1 <= self.t0 {
            return invalid("grid extents must be positive");
        }
        if self.cells.iter().any(|c| *c == 0) || self.steps == 0 {
            return invalid("grid needs at least one cell per axis");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.sides[axis] / self.cells[axis] as f64
    }

    pub fn tau(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn spatial_len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.h(i)).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spatial_cell_volume() * self.tau()
    }

    /// Center time of time cell `k`.
    pub fn time_center(&self, k: usize) -> f64 {
        self.t0 + (k as f64 + 0.5) * self.tau()
    }

    /// Multi-index of a spatial linear index.
    pub fn spatial_index(&self, mut lin: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for i in (0..n).rev() {
            idx[i] = lin % self.cells[i];
            lin /= self.cells[i];
        }
        idx
    }

    pub fn spatial_linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.cells).fold(0, |acc, (i, n)| acc * n + i)
    }

    /// `(time cell, spatial linear index)` of a flat index.
    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.spatial_len(), flat % self.spatial_len())
    }

    pub fn spatial_center(&self, lin: usize) -> Vec<f64> {
        self.spatial_index(lin)
            .iter()
            .enumerate()
            .map(|(i, &j)| self.corner[i] + (j as f64 + 0.5) * self.h(i))
            .collect()
    }

    pub fn center(&self, flat: usize) -> SpaceTimePoint {
        let (k, s) = self.split(flat);
        SpaceTimePoint::new(self.spatial_center(s), self.time_center(k))
    }

    /// Spatial bounds `(lo, hi)` of a spatial cell.
    pub fn spatial_bounds(&self, lin: usize) -> (Vec<f64>, Vec<f64>) {
        let idx = self.spatial_index(lin);
        let lo: Vec<f64> = (0..self.dim()).map(|i| self.corner[i] + idx[i] as f64 * self.h(i)).collect();
        let hi = lo.iter().enumerate().map(|(i, l)| l + self.h(i)).collect();
        (lo, hi)
    }

    pub fn time_bounds(&self, k: usize) -> (f64, f64) {
        let tau = self.tau();
        (self.t0 + k as f64 * tau, self.t0 + (k + 1) as f64 * tau)
    }

    /// All cell centers in storage order.
    pub fn centers(&self) -> Vec<SpaceTimePoint> {
        (0..self.len()).map(|f| self.center(f)).collect()
    }

    /// Index of the spatial cell containing `x`, if any.
    pub fn locate_spatial(&self, x: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let u = (x[i] - self.corner[i]) / self.h(i);
            if !(u >= 0.0) || u >= self.cells[i] as f64 {
                return None;
            }
            idx.push(u as usize);
        }
        Some(self.spatial_linear(&idx))
    }

    pub fn locate_time(&self, t: f64) -> Option<usize> {
        let u = (t - self.t0) / self.tau();
        if !(u >= 0.0) || u >= self.steps as f64 {
            return None;
        }
        Some(u as usize)
    }

    /// Spatial diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.sides.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&SpaceTimePoint) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values of time cell `k`.
    pub fn slice(&self, k: usize) -> &[f64] {
        let m = self.grid.spatial_len();
        &self.values[k * m..(k + 1) * m]
    }

    /// `∫ f` treating the values as piecewise constant.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let g = GridSpec::new(vec![-1.0, 0.0], vec![2.0, 3.0], 0.0, 1.0, vec![4, 3], 5).unwrap();
        assert_eq!(g.len(), 60);
        for s in 0..g.spatial_len() {
            assert_eq!(g.spatial_linear(&g.spatial_index(s)), s);
            assert_eq!(g.locate_spatial(&g.spatial_center(s)), Some(s));
        }
        let c = g.center(13);
        assert_eq!(g.split(13), (1, 1));
        assert!((c.t - 0.3).abs() < 1e-15);
        assert_eq!(c.x, vec![-0.75, 1.5]);
        assert_eq!(g.locate_time(1.0), None);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(vec![0.0], vec![0.0], 0.0, 1.0, vec![1], 1).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], 1.0, 1.0, vec![1], 1).is_err());
        assert!(GridSpec::new(vec![f64::NAN], vec![1.0], 0.0, 1.0, vec![1], 1).is_err());
        let g = GridSpec::cube(1, 1.0, 2, 0.0, 1.0, 1).unwrap();
        assert!(GridFunction::new(g.clone(), vec![0.0, f64::INFINITY]).is_err());
        assert!(GridFunction::new(g, vec![0.0]).is_err());
    }
}
