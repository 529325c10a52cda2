//! The heat equation `u_t - Δu = μ` with initial datum `σ`, in free space by
//! exact convolution with `H_2` and in a box with zero boundary values by
//! finite differences.

mod fd;
mod verify;

pub use fd::{solve_dirichlet, solve_dirichlet_with, Absorption};
pub use verify::{
    gradient_bound_check, lower_bound_refinement, refined, refinement_report, restrict, verify_decay, verify_lower_bound,
    verify_two_sided_bounds, DecayTarget,
};
pub(crate) use fd::march;
pub(crate) use verify::{gradient_ratios, ratio};

use crate::error::{invalid, Error, Result};
use crate::geometry::SpaceTimePoint;
use crate::grid::{GridFunction, GridSpec};
use crate::measure::{decompose_signed, DiscreteMeasure};
use crate::potentials::{kernel_convolve, Kernel, KernelKind, PotentialSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    FreeSpace,
    #[default]
    DirichletBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatProblem {
    pub mu: DiscreteMeasure,
    /// Initial datum; its atoms and slab density are placed on `t = 0`.
    pub sigma: DiscreteMeasure,
    #[serde(default)]
    pub domain: Domain,
    pub grid: GridSpec,
    #[serde(default)]
    pub scheme: Scheme,
}

impl HeatProblem {
    pub fn new(mu: DiscreteMeasure, sigma: DiscreteMeasure, domain: Domain, grid: GridSpec, scheme: Scheme) -> Result<Self> {
        let pr = Self { mu, sigma, domain, grid, scheme };
        pr.validate()?;
        Ok(pr)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.mu.validate()?;
        self.sigma.validate()?;
        let n = self.grid.dim();
        if self.mu.dim != n || self.sigma.dim != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.mu.dim.max(self.sigma.dim) });
        }
        if self.domain == Domain::DirichletBox && self.scheme == Scheme::Explicit {
            let limit = stability_limit(&self.grid);
            if self.grid.tau() > limit * (1.0 + 1e-12) {
                return Err(Error::Unstable { tau: self.grid.tau(), limit });
            }
        }
        Ok(())
    }

    /// `μ + σ ⊗ δ_{t=0}` as one space-time measure.
    pub fn data(&self) -> Result<DiscreteMeasure> {
        self.mu.plus(&initial_slice(&self.sigma))
    }

    /// Final time `T` measured from the start of the data.
    pub fn horizon(&self) -> f64 {
        self.grid.t1 - self.grid.t0.min(0.0)
    }
}

/// Explicit-scheme bound `τ ≤ h²/(2N)` with the smallest spacing.
pub fn stability_limit(grid: &GridSpec) -> f64 {
    let h = (0..grid.dim()).map(|i| grid.h(i)).fold(f64::INFINITY, f64::min);
    h * h / (2.0 * grid.dim() as f64)
}

/// Moves atoms to `t = 0` and marks the density as a slab.
pub fn initial_slice(sigma: &DiscreteMeasure) -> DiscreteMeasure {
    let mut s = sigma.clone();
    for a in &mut s.atoms {
        a.t = 0.0;
    }
    if let Some(d) = &mut s.density {
        if !d.slab {
            // collapse the time axis: the slab carries the time integral
            let m = d.grid.spatial_len();
            let tau = d.grid.tau();
            let values = (0..m).map(|i| (0..d.grid.steps).map(|k| d.values[k * m + i]).sum::<f64>() * tau).collect();
            d.values = values;
            d.slab = true;
        }
    }
    s
}

fn heat_spec() -> PotentialSpec {
    PotentialSpec::new(2.0)
}

/// `u = H_2 * (μ + σ ⊗ δ_{t=0})` at arbitrary points.
pub fn free_space_at(pr: &HeatProblem, points: &[SpaceTimePoint]) -> Result<Vec<f64>> {
    let data = pr.data()?;
    for z in points {
        if z.dim() != data.dim {
            return Err(Error::DimensionMismatch { expected: data.dim, found: z.dim() });
        }
        if data.atoms.iter().any(|a| a.mass != 0.0 && a.t == z.t && a.x == z.x) {
            return Err(Error::SingularPoint);
        }
    }
    let (plus, minus) = decompose_signed(&data);
    let k = Kernel::forward(KernelKind::HeatH);
    let spec = heat_spec();
    points
        .iter()
        .map(|z| {
            let a = if plus.is_zero() { 0.0 } else { kernel_convolve(&plus, k, &spec, z)? };
            let b = if minus.is_zero() { 0.0 } else { kernel_convolve(&minus, k, &spec, z)? };
            Ok(a - b)
        })
        .collect()
}

/// Free-space solution at the cell centers of the problem grid.
pub fn solve_free_space(pr: &HeatProblem) -> Result<GridFunction> {
    pr.validate()?;
    let values = free_space_at(pr, &pr.grid.centers())?;
    GridFunction::new(pr.grid.clone(), values)
}

/// Solver selected by the problem's domain.
pub fn solve(pr: &HeatProblem) -> Result<GridFunction> {
    match pr.domain {
        Domain::FreeSpace => solve_free_space(pr),
        Domain::DirichletBox => solve_dirichlet(pr),
    }
}

/// Node values of a solution, the exchange format of the verification passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSolution {
    pub points: Vec<SpaceTimePoint>,
    pub values: Vec<f64>,
}

impl SampledSolution {
    pub fn new(points: Vec<SpaceTimePoint>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("solution values".into()));
        }
        Ok(Self { points, values })
    }

    pub fn from_grid(u: &GridFunction) -> Self {
        Self { points: u.grid.centers(), values: u.values.clone() }
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// CSV with columns `x1..xN,t,u`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        out.push("t".into());
        out.push("u".into());
        let mut s = out.join(",");
        s.push('\n');
        for (p, v) in self.points.iter().zip(&self.values) {
            let row: Vec<String> = p.x.iter().chain([&p.t, v]).map(|x| format!("{x:e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty solution file".into()))?;
        let cols = header.split(',').count();
        if cols < 3 {
            return Err(Error::Parse("solution needs columns x1..xN,t,u".into()));
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(Error::Parse(format!("line {}: expected {cols} fields", i + 2)));
            }
            points.push(SpaceTimePoint::new(row[..cols - 2].to_vec(), row[cols - 2]));
            values.push(row[cols - 1]);
        }
        Self::new(points, values)
    }

    /// Grid function on the uniform lattice whose cell centers are exactly
    /// the sampled points.
    pub fn to_grid(&self) -> Result<GridFunction> {
        let n = self.dim();
        if self.points.is_empty() {
            return Err(Error::Parse("no nodes to infer a grid from".into()));
        }
        let coord = |p: &SpaceTimePoint, a: usize| if a < n { p.x[a] } else { p.t };
        let mut axes = Vec::with_capacity(n + 1);
        for a in 0..=n {
            let mut v: Vec<f64> = self.points.iter().map(|p| coord(p, a)).collect();
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let span = v[v.len() - 1] - v[0];
            v.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * span.max(1.0));
            if v.len() < 2 {
                return Err(Error::Parse(format!("axis {a} has a single node; spacing is undefined")));
            }
            let h = span / (v.len() - 1) as f64;
            if v.windows(2).any(|w| ((w[1] - w[0]) / h - 1.0).abs() > 1e-6) {
                return Err(Error::Parse(format!("nodes along axis {a} are not uniformly spaced")));
            }
            axes.push((v[0], h, v.len()));
        }
        let corner = (0..n).map(|a| axes[a].0 - axes[a].1 / 2.0).collect();
        let sides = (0..n).map(|a| axes[a].1 * axes[a].2 as f64).collect();
        let cells: Vec<usize> = (0..n).map(|a| axes[a].2).collect();
        let (t0, tau, steps) = axes[n];
        let grid = GridSpec::new(corner, sides, t0 - tau / 2.0, t0 + tau * (steps as f64 - 0.5), cells, steps)?;
        if grid.len() != self.points.len() {
            return Err(Error::Parse(format!("{} nodes do not fill a {}-node lattice", self.points.len(), grid.len())));
        }
        let mut values = vec![f64::NAN; grid.len()];
        for (p, v) in self.points.iter().zip(&self.values) {
            let idx: Vec<usize> = (0..n).map(|a| ((p.x[a] - axes[a].0) / axes[a].1).round() as usize).collect();
            let k = ((p.t - t0) / tau).round() as usize;
            values[k * grid.spatial_len() + grid.spatial_linear(&idx)] = *v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("nodes repeat, so the lattice is incomplete".into()));
        }
        GridFunction::new(grid, values)
    }
}

pub(crate) fn require_grid_dim(u: &GridFunction, mu: &DiscreteMeasure) -> Result<()> {
    if u.grid.dim() != mu.dim {
        return invalid("solution and measure live in different dimensions");
    }
    Ok(())
}
