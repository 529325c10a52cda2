//! Parabolic and elliptic capacities of grid sets.
//!
//! A capacity is approximated on the lattice of cell centers of the set's
//! grid: the constraint `K * f ≥ 1` is imposed at the listed cell centers and
//! `f` is piecewise constant on the cells of a source box aligned with the same
//! lattice. One convex dual solve yields both a feasible upper bound and a
//! Hölder lower bound for that discrete program.

mod checks;
mod matrix;
mod solver;
mod trace;

pub use checks::{capacity_equivalence_report, cylinder_scaling_check, isoperimetric_check, EquivalenceKind};
pub use matrix::{KernelMatrix, SourceBox};
pub use solver::{capacity_dual, capacity_primal, solve_capacity, solve_capacity_in, CapacityEstimate};
pub use trace::{trace_constants, TraceOptions};

use crate::error::{invalid, Error, Result};
use crate::geometry::{spatial_distance, ParabolicCylinder};
use crate::grid::GridSpec;
use crate::potentials::{EllipticKind, Kernel, KernelKind, PotentialSpec};
use serde::{Deserialize, Serialize};

/// Kernels whose capacities can be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKernel {
    HeatH,
    BesselG,
    RieszE,
    /// `|x|^{-(N-α)}` on `ℝ^N`
    EllipticRiesz,
    /// `∫_0^∞ G_α(x, t) dt` on `ℝ^N`
    EllipticBessel,
}

impl CapacityKernel {
    pub fn is_elliptic(self) -> bool {
        matches!(self, Self::EllipticRiesz | Self::EllipticBessel)
    }

    pub(crate) fn parabolic(self) -> Option<Kernel> {
        match self {
            Self::HeatH => Some(Kernel::forward(KernelKind::HeatH)),
            Self::BesselG => Some(Kernel::forward(KernelKind::BesselG)),
            Self::RieszE => Some(Kernel::forward(KernelKind::RieszE)),
            _ => None,
        }
    }

    pub(crate) fn elliptic(self) -> Option<EllipticKind> {
        match self {
            Self::EllipticRiesz => Some(EllipticKind::Riesz),
            Self::EllipticBessel => Some(EllipticKind::Bessel),
            _ => None,
        }
    }

    /// Kernels vanishing for sources later than the target.
    pub(crate) fn is_causal(self) -> bool {
        matches!(self, Self::HeatH | Self::BesselG)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Primal,
    Dual,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySpec {
    pub kernel: CapacityKernel,
    pub alpha: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Relative gap between the two bounds at which the solve stops.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Padding of the source box around the set, in units of the set radius.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_p() -> f64 {
    2.0
}
fn default_iterations() -> usize {
    3000
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_margin() -> f64 {
    0.5
}

impl CapacitySpec {
    pub fn new(kernel: CapacityKernel, alpha: f64, p: f64) -> Self {
        Self {
            kernel,
            alpha,
            p,
            r: None,
            delta: 0.0,
            solver: SolverChoice::Both,
            iterations: default_iterations(),
            tolerance: default_tolerance(),
            margin: default_margin(),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_decay(mut self, r: Option<f64>, delta: f64) -> Self {
        self.r = r;
        self.delta = delta;
        self
    }

    pub fn p_prime(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec { alpha: self.alpha, p: self.p, r: self.r, delta: self.delta, quadrature: Default::default() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.kernel.is_elliptic() {
            if !(self.alpha > 0.0 && self.alpha < dim as f64) && self.kernel == CapacityKernel::EllipticRiesz {
                return invalid(format!("alpha = {} must lie in (0, N) for the elliptic Riesz kernel", self.alpha));
            }
            if !(self.alpha > 0.0) {
                return invalid("alpha must be positive");
            }
            if !(self.p > 1.0 && self.p.is_finite()) {
                return invalid(format!("p = {} must exceed 1", self.p));
            }
        } else {
            self.potential_spec().validate(dim)?;
        }
        if self.iterations == 0 || !(self.tolerance > 0.0) || !(self.margin >= 0.0) {
            return invalid("solver controls must be positive");
        }
        Ok(())
    }
}

/// A union of grid cells. For elliptic capacities the grid has one time step
/// and only the spatial cells matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub grid: GridSpec,
    /// Sorted flat cell indices.
    pub cells: Vec<usize>,
}

impl CompactSet {
    pub fn new(grid: GridSpec, mut cells: Vec<usize>) -> Result<Self> {
        grid.validate()?;
        cells.sort_unstable();
        cells.dedup();
        if let Some(&c) = cells.last() {
            if c >= grid.len() {
                return invalid(format!("cell index {c} outside a grid of {} cells", grid.len()));
            }
        }
        Ok(Self { grid, cells })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, cells: Vec::new() }
    }

    /// Cells of `grid` whose centers lie in the closed cylinder.
    pub fn cylinder(grid: GridSpec, cyl: &ParabolicCylinder) -> Result<Self> {
        if cyl.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: cyl.dim() });
        }
        let (lo, hi) = cyl.time_interval();
        let eps = 1e-9 * cyl.radius.max(1.0);
        let cells = (0..grid.len())
            .filter(|&f| {
                let c = grid.center(f);
                spatial_distance(&c.x, &cyl.center.x) <= cyl.radius + eps && c.t >= lo - eps && c.t <= hi + eps
            })
            .collect();
        Self::new(grid, cells)
    }

    /// Lattice nodes of spacing `(h, tau)` through the cylinder center that
    /// lie in the closed cylinder, as the cell centers of a fitted grid.
    pub fn cylinder_nodes(cyl: &ParabolicCylinder, h: f64, tau: f64) -> Result<Self> {
        if !(h > 0.0 && tau > 0.0) {
            return invalid("lattice spacings must be positive");
        }
        let n = cyl.dim();
        let (lo, hi) = cyl.time_interval();
        let m = (cyl.radius / h + 1e-9).floor() as usize;
        let c = &cyl.center;
        let k_lo = ((lo - c.t) / tau - 1e-9).ceil() as i64;
        let k_hi = ((hi - c.t) / tau + 1e-9).floor() as i64;
        let steps = (k_hi - k_lo + 1) as usize;
        let corner = c.x.iter().map(|x| x - (m as f64 + 0.5) * h).collect();
        let t0 = c.t + (k_lo as f64 - 0.5) * tau;
        let grid = GridSpec::new(corner, vec![(2 * m + 1) as f64 * h; n], t0, t0 + steps as f64 * tau, vec![2 * m + 1; n], steps)?;
        Self::cylinder(grid, cyl)
    }

    /// Spatial cells whose centers lie in the closed ball, for elliptic use.
    pub fn spatial_ball(grid: GridSpec, x: &[f64], r: f64) -> Result<Self> {
        if grid.steps != 1 {
            return invalid("spatial sets live on grids with a single time step");
        }
        let cells = (0..grid.spatial_len())
            .filter(|&s| spatial_distance(&grid.spatial_center(s), x) <= r * (1.0 + 1e-12))
            .collect();
        Self::new(grid, cells)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Space-time measure of the union of cells.
    pub fn volume(&self) -> f64 {
        self.cells.len() as f64 * self.grid.cell_volume()
    }

    pub fn spatial_volume(&self) -> f64 {
        self.cells.len() as f64 * self.grid.spatial_cell_volume()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return invalid("sets live on different grids");
        }
        Self::new(self.grid.clone(), self.cells.iter().chain(&other.cells).copied().collect())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.grid == other.grid && self.cells.iter().all(|c| other.cells.binary_search(c).is_ok())
    }

    /// Integer lattice coordinates of the cells, spatial axes first and time last.
    pub(crate) fn coordinates(&self) -> Vec<Vec<i64>> {
        self.cells
            .iter()
            .map(|&f| {
                let (k, s) = self.grid.split(f);
                let mut v: Vec<i64> = self.grid.spatial_index(s).iter().map(|&i| i as i64).collect();
                v.push(k as i64);
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimePoint;

    #[test]
    fn cylinder_nodes_sit_on_the_lattice() {
        let cyl = ParabolicCylinder::centered(SpaceTimePoint::new(vec![0.0, 0.0], 0.0), 1.0).unwrap();
        let set = CompactSet::cylinder_nodes(&cyl, 0.5, 0.25).unwrap();
        // 13 spatial nodes in the closed unit disk times 5 time nodes in [-1/2, 1/2]
        assert_eq!(set.len(), 13 * 5);
        assert_eq!(set.grid.steps, 5);
        let c = set.grid.center(set.cells[0]);
        assert!((c.t + 0.5).abs() < 1e-12);
        for &f in &set.cells {
            let p = set.grid.center(f);
            for v in &p.x {
                assert!(((v / 0.5).round() * 0.5 - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn set_algebra() {
        let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 2).unwrap();
        let a = CompactSet::new(g.clone(), vec![3, 1, 1]).unwrap();
        let b = CompactSet::new(g.clone(), vec![1, 5]).unwrap();
        assert_eq!(a.cells, vec![1, 3]);
        let u = a.union(&b).unwrap();
        assert_eq!(u.cells, vec![1, 3, 5]);
        assert!(a.is_subset(&u) && !u.is_subset(&a));
        assert!(CompactSet::new(g, vec![8]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec = CapacitySpec::new(CapacityKernel::RieszE, 1.0, 2.0).with_decay(Some(2.0), 0.5);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"R\":2.0") && json.contains("riesz_e"));
        let back: CapacitySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!((spec.p_prime() - 2.0).abs() < 1e-15);
        let minimal: CapacitySpec = serde_json::from_str(r#"{"kernel":"heat_h","alpha":1.5}"#).unwrap();
        assert_eq!(minimal.p, 2.0);
        assert!(CapacitySpec::new(CapacityKernel::RieszE, 5.0, 2.0).validate(2).is_err());
    }
}
