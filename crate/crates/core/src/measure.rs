//! Signed space-time measures: weighted Dirac atoms plus an optional
//! piecewise-constant density on a grid.
//!
//! A density flagged `slab` lives on the `t = 0` slice: its grid supplies the
//! spatial cells only and its values are spatial densities.

use crate::error::{Error, Result};
use crate::geometry::{spatial_distance, CylinderVariant, ParabolicCylinder, SpaceTimePoint};
use crate::grid::GridSpec;
use crate::overlap::{ball_box_volume, OverlapMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub t: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(x: Vec<f64>, t: f64, mass: f64) -> Self {
        Self { x, t, mass }
    }

    pub fn point(&self) -> SpaceTimePoint {
        SpaceTimePoint::new(self.x.clone(), self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Concentrated on `t = 0`; only the spatial cells of `grid` are used.
    #[serde(default)]
    pub slab: bool,
}

impl Density {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let d = Self { grid, values, slab: false };
        d.validate()?;
        Ok(d)
    }

    /// Spatial density `σ` representing `σ ⊗ δ_{t=0}`.
    pub fn slab(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let d = Self { grid, values, slab: true };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let expected = if self.slab { self.grid.spatial_len() } else { self.grid.len() };
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: self.values.len() });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density values".into()));
        }
        Ok(())
    }

    /// Volume represented by one value.
    pub fn cell_volume(&self) -> f64 {
        if self.slab {
            self.grid.spatial_cell_volume()
        } else {
            self.grid.cell_volume()
        }
    }

    fn time_cells(&self) -> usize {
        if self.slab {
            1
        } else {
            self.grid.steps
        }
    }

    /// Bounding box `(lo, hi, t_lo, t_hi)` of the nonzero cells.
    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
        let n = self.grid.dim();
        let m = self.grid.spatial_len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let (mut tlo, mut thi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for (i, v) in self.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            any = true;
            let (k, s) = (i / m, i % m);
            let (a, b) = self.grid.spatial_bounds(s);
            for j in 0..n {
                lo[j] = lo[j].min(a[j]);
                hi[j] = hi[j].max(b[j]);
            }
            let (ta, tb) = if self.slab { (0.0, 0.0) } else { self.grid.time_bounds(k) };
            tlo = tlo.min(ta);
            thi = thi.max(tb);
        }
        any.then_some((lo, hi, tlo, thi))
    }

    /// Spatial cells cut by `B_r(x)` with their overlap volumes.
    pub fn ball_overlaps(&self, x: &[f64], r: f64, mode: OverlapMode) -> Vec<(usize, f64)> {
        ball_cell_overlaps(&self.grid, x, r, mode)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect(), slab: self.slab }
    }
}

/// Spatial cells of `grid` cut by the ball `B_r(x)`, with overlap volumes.
pub fn ball_cell_overlaps(grid: &GridSpec, x: &[f64], r: f64, mode: OverlapMode) -> Vec<(usize, f64)> {
    let n = grid.dim();
    let mut lo_idx = vec![0usize; n];
    let mut hi_idx = vec![0usize; n];
    for i in 0..n {
        let h = grid.h(i);
        let a = ((x[i] - r - grid.corner[i]) / h).floor();
        let b = ((x[i] + r - grid.corner[i]) / h).floor();
        if b < 0.0 || a >= grid.cells[i] as f64 {
            return Vec::new();
        }
        lo_idx[i] = a.max(0.0) as usize;
        hi_idx[i] = (b as usize).min(grid.cells[i] - 1);
    }
    let mut out = Vec::new();
    let mut idx = lo_idx.clone();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    loop {
        for i in 0..n {
            lo[i] = grid.corner[i] + idx[i] as f64 * grid.h(i);
            hi[i] = lo[i] + grid.h(i);
        }
        let v = ball_box_volume(x, r, &lo, &hi, mode);
        if v > 0.0 {
            out.push((grid.spatial_linear(&idx), v));
        }
        let mut axis = n;
        while axis > 0 {
            axis -= 1;
            if idx[axis] < hi_idx[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo_idx[axis];
            if axis == 0 {
                return out;
            }
        }
    }
}

/// Length of `[a, b] ∩ [c, d]`.
pub(crate) fn interval_overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub dim: usize,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density: Option<Density>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>, density: Option<Density>) -> Result<Self> {
        let m = Self { dim, atoms, density };
        m.validate()?;
        Ok(m)
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, atoms: Vec::new(), density: None }
    }

    pub fn dirac(p: &SpaceTimePoint, mass: f64) -> Self {
        Self { dim: p.dim(), atoms: vec![Atom::new(p.x.clone(), p.t, mass)], density: None }
    }

    pub fn from_density(density: Density) -> Result<Self> {
        Self::new(density.grid.dim(), Vec::new(), Some(density))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("measure dimension must be at least 1".into()));
        }
        for a in &self.atoms {
            if a.x.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: a.x.len() });
            }
            if !a.t.is_finite() || !a.mass.is_finite() || a.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("atom".into()));
            }
        }
        if let Some(d) = &self.density {
            d.validate()?;
            if d.grid.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: d.grid.dim() });
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0)
            && self.density.as_ref().map_or(true, |d| d.values.iter().all(|v| *v == 0.0))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= 0.0)
            && self.density.as_ref().map_or(true, |d| d.values.iter().all(|v| *v >= 0.0))
    }

    pub(crate) fn require_nonnegative(&self) -> Result<()> {
        if self.is_nonnegative() {
            Ok(())
        } else {
            Err(Error::SignedMeasure("split with decompose_signed first".into()))
        }
    }

    /// `|μ|(ℝ^{N+1})`.
    pub fn total_variation(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass.abs()).sum();
        let d = self.density.as_ref().map_or(0.0, |d| d.values.iter().map(|v| v.abs()).sum::<f64>() * d.cell_volume());
        a + d
    }

    /// `μ(ℝ^{N+1})`.
    pub fn total_mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let d = self.density.as_ref().map_or(0.0, |d| d.values.iter().sum::<f64>() * d.cell_volume());
        a + d
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| Atom::new(a.x.clone(), a.t, a.mass * lambda)).collect(),
            density: self.density.as_ref().map(|d| d.map_values(|v| v * lambda)),
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| Atom::new(a.x.clone(), a.t, a.mass.abs())).collect(),
            density: self.density.as_ref().map(|d| d.map_values(f64::abs)),
        }
    }

    /// Sum of two measures; densities must share a grid.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let density = match (&self.density, &other.density) {
            (None, d) | (d, None) => d.clone(),
            (Some(a), Some(b)) => {
                if a.grid != b.grid || a.slab != b.slab {
                    return Err(Error::InvalidParameter("densities on different grids".into()));
                }
                Some(Density {
                    grid: a.grid.clone(),
                    values: a.values.iter().zip(&b.values).map(|(u, v)| u + v).collect(),
                    slab: a.slab,
                })
            }
        };
        Ok(Self { dim: self.dim, atoms, density })
    }

    /// Restriction to the cylinder: atoms by membership, density cells by center.
    pub fn restrict(&self, c: &ParabolicCylinder) -> Self {
        let atoms = self.atoms.iter().filter(|a| c.contains(&a.point())).cloned().collect();
        let density = self.density.as_ref().map(|d| {
            let m = d.grid.spatial_len();
            let values = d
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let (k, s) = (i / m, i % m);
                    let t = if d.slab { 0.0 } else { d.grid.time_center(k) };
                    let p = SpaceTimePoint::new(d.grid.spatial_center(s), t);
                    if c.contains(&p) {
                        *v
                    } else {
                        0.0
                    }
                })
                .collect();
            Density { grid: d.grid.clone(), values, slab: d.slab }
        });
        Self { dim: self.dim, atoms, density }
    }

    /// `μ(c)`.
    pub fn cylinder_measure(&self, c: &ParabolicCylinder) -> f64 {
        self.cylinder_measure_with(c, OverlapMode::Exact)
    }

    pub fn cylinder_measure_with(&self, c: &ParabolicCylinder, mode: OverlapMode) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| cyl_contains(c, &a.x, a.t)).map(|a| a.mass).sum();
        atoms + self.density.as_ref().map_or(0.0, |d| density_in_cylinder(d, c, mode))
    }

    /// `μ(B_r(x) × ℝ)`, the mass of the spatial projection on a ball.
    pub fn ball_measure(&self, x: &[f64], r: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| spatial_distance(&a.x, x) < r).map(|a| a.mass).sum();
        let dens = self.density.as_ref().map_or(0.0, |d| {
            let m = d.grid.spatial_len();
            let w = if d.slab { 1.0 } else { d.grid.tau() };
            d.ball_overlaps(x, r, OverlapMode::Exact)
                .iter()
                .map(|(s, a)| a * w * (0..d.time_cells()).map(|k| d.values[k * m + s]).sum::<f64>())
                .sum()
        });
        atoms + dens
    }

    /// `(μ⁺, μ⁻)` with `μ = μ⁺ - μ⁻`.
    pub fn decompose_signed(&self) -> (Self, Self) {
        let part = |sign: f64| Self {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .filter(|a| sign * a.mass > 0.0)
                .map(|a| Atom::new(a.x.clone(), a.t, sign * a.mass))
                .collect(),
            density: self.density.as_ref().map(|d| d.map_values(|v| (sign * v).max(0.0))),
        };
        (part(1.0), part(-1.0))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }
}

fn cyl_contains(c: &ParabolicCylinder, x: &[f64], t: f64) -> bool {
    spatial_distance(x, &c.center.x) < c.radius && c.contains_time(t)
}

pub(crate) fn density_in_cylinder(d: &Density, c: &ParabolicCylinder, mode: OverlapMode) -> f64 {
    let m = d.grid.spatial_len();
    if d.slab {
        if !c.contains_time(0.0) {
            return 0.0;
        }
        return d.ball_overlaps(&c.center.x, c.radius, mode).iter().map(|(s, a)| a * d.values[*s]).sum();
    }
    let (lo, hi) = c.time_interval();
    let weights: Vec<(usize, f64)> = (0..d.grid.steps)
        .filter_map(|k| {
            let (a, b) = d.grid.time_bounds(k);
            let w = interval_overlap(lo, hi, a, b);
            (w > 0.0).then_some((k, w))
        })
        .collect();
    if weights.is_empty() {
        return 0.0;
    }
    d.ball_overlaps(&c.center.x, c.radius, mode)
        .iter()
        .map(|(s, a)| a * weights.iter().map(|(k, w)| w * d.values[k * m + s]).sum::<f64>())
        .sum()
}

/// `μ(c)` as a free function.
pub fn cylinder_measure(mu: &DiscreteMeasure, c: &ParabolicCylinder) -> f64 {
    mu.cylinder_measure(c)
}

/// `(μ⁺, μ⁻)` as a free function.
pub fn decompose_signed(mu: &DiscreteMeasure) -> (DiscreteMeasure, DiscreteMeasure) {
    mu.decompose_signed()
}

pub(crate) fn centered(x: &[f64], t: f64, r: f64) -> ParabolicCylinder {
    ParabolicCylinder { center: SpaceTimePoint::new(x.to_vec(), t), radius: r, variant: CylinderVariant::Centered }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_density_2d() -> DiscreteMeasure {
        let g = GridSpec::cube(2, 1.0, 8, -1.0, 1.0, 8).unwrap();
        DiscreteMeasure::from_density(Density::new(g, vec![1.0; 512]).unwrap()).unwrap()
    }

    #[test]
    fn atom_examples() {
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let c = ParabolicCylinder::centered(SpaceTimePoint::origin(2), 1.0).unwrap();
        assert_eq!(mu.cylinder_measure(&c), 1.0);
        let b = ParabolicCylinder::backward(SpaceTimePoint::new(vec![3.0, 0.0], 0.0), 1.0).unwrap();
        assert_eq!(mu.cylinder_measure(&b), 0.0);
    }

    #[test]
    fn density_cylinder_example() {
        let c = ParabolicCylinder::centered(SpaceTimePoint::origin(2), 0.5).unwrap();
        let v = unit_density_2d().cylinder_measure(&c);
        assert!((v - PI / 16.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn slab_counts_only_when_zero_in_window() {
        let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 1).unwrap();
        let mu = DiscreteMeasure::from_density(Density::slab(g, vec![1.0; 4]).unwrap()).unwrap();
        assert!((mu.total_mass() - 2.0).abs() < 1e-15);
        let inside = ParabolicCylinder::centered(SpaceTimePoint::new(vec![0.0], 0.1), 0.5).unwrap();
        assert!((mu.cylinder_measure(&inside) - 1.0).abs() < 1e-15);
        let later = ParabolicCylinder::centered(SpaceTimePoint::new(vec![0.0], 0.2), 0.5).unwrap();
        assert_eq!(mu.cylinder_measure(&later), 0.0);
        assert!((mu.ball_measure(&[0.0], 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decompose_examples() {
        let mu = DiscreteMeasure::new(
            1,
            vec![Atom::new(vec![0.0], 0.0, 2.0), Atom::new(vec![1.0], 0.0, -3.0)],
            None,
        )
        .unwrap();
        let (p, n) = mu.decompose_signed();
        assert_eq!(p.atoms, vec![Atom::new(vec![0.0], 0.0, 2.0)]);
        assert_eq!(n.atoms, vec![Atom::new(vec![1.0], 0.0, 3.0)]);
        let pos = unit_density_2d();
        let (p, n) = pos.decompose_signed();
        assert_eq!(p, pos);
        assert!(n.is_zero());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let mu = DiscreteMeasure::new(1, vec![Atom::new(vec![0.5], -1.0, 2.0)], None).unwrap();
        assert_eq!(DiscreteMeasure::from_json_str(&mu.to_json_string()).unwrap(), mu);
        let bad = r#"{"dim": 1, "atoms": [{"x": [1e999], "t": 0, "mass": 1}]}"#;
        assert!(DiscreteMeasure::from_json_str(bad).is_err());
        let err = DiscreteMeasure::from_json_str("{\n \"dim\": 1,\n \"atoms\": [oops]}").unwrap_err();
        assert!(format!("{err}").contains("line 3"), "{err}");
    }

    proptest! {
        #[test]
        fn lebesgue_volume(x in -0.3f64..0.3, y in -0.3f64..0.3, t in -0.3f64..0.3, r in 0.05f64..0.6) {
            let c = centered(&[x, y], t, r);
            let v = unit_density_2d().cylinder_measure(&c);
            let exact = c.volume();
            prop_assert!((v - exact).abs() <= 1e-6 * exact);
        }

        #[test]
        fn monotone_in_radius(x in -1.0f64..1.0, t in -1.0f64..1.0, r1 in 0.01f64..1.0, dr in 0.0f64..1.0) {
            let g = GridSpec::cube(2, 1.0, 5, -1.0, 1.0, 4).unwrap();
            let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64) * 0.1).collect();
            let mut mu = DiscreteMeasure::from_density(Density::new(g, vals).unwrap()).unwrap();
            mu.atoms.push(Atom::new(vec![0.1, -0.2], 0.05, 0.7));
            let a = mu.cylinder_measure(&centered(&[x, 0.3], t, r1));
            let b = mu.cylinder_measure(&centered(&[x, 0.3], t, r1 + dr));
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn signed_parts_reassemble(seed in 0u64..1000, x in -1.0f64..1.0, t in -1.0f64..1.0, r in 0.05f64..1.5) {
            let g = GridSpec::cube(2, 1.0, 4, -1.0, 1.0, 3).unwrap();
            let vals: Vec<f64> = (0..g.len()).map(|i| (((i as u64 * 7919 + seed) % 13) as f64 - 6.0) / 3.0).collect();
            let atoms = vec![
                Atom::new(vec![0.2, 0.1], 0.3, (seed % 5) as f64 - 2.0),
                Atom::new(vec![-0.4, 0.0], -0.2, 1.5),
            ];
            let mu = DiscreteMeasure::new(2, atoms, Some(Density::new(g, vals).unwrap())).unwrap();
            let (p, n) = mu.decompose_signed();
            prop_assert!(p.is_nonnegative() && n.is_nonnegative());
            let c = centered(&[x, -x / 2.0], t, r);
            let diff = p.cylinder_measure(&c) - n.cylinder_measure(&c) - mu.cylinder_measure(&c);
            prop_assert!(diff.abs() < 1e-12);
            prop_assert!((p.total_variation() + n.total_variation() - mu.total_variation()).abs() < 1e-12);
        }
    }
}
