//! Kernels and potentials of space-time measures.

mod dyadic;
mod elliptic;
mod kernels;
pub(crate) mod lattice;
mod lower_sum;
pub(crate) mod radial;
mod riesz;
mod time_slice;

pub use dyadic::{dyadic_wolff, DyadicRange};
pub use elliptic::{elliptic_bessel_kernel, elliptic_riesz_potential, EllipticKind};
pub(crate) use elliptic::elliptic_cell_integral;
pub use kernels::{cell_kernel_integral, kernel_convolve, kernel_eval, heat_constant};
pub use lattice::LatticePotential;
pub(crate) use lattice::{lattice_for, potential_at_cells};
pub use lower_sum::discrete_lower_sum;
pub use riesz::{maximal_potential, riesz_potential, wolff_potential, evaluate_many, PotentialKind};
pub use time_slice::{time_slice_bound_check, TimeSliceBranch};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureControls {
    /// Relative radius, in units of the smallest density cell, below which the
    /// density mass profile is extrapolated as a pure power.
    pub rho_min: f64,
    /// Overrides the radius of full enclosure of the density support.
    pub rho_max: Option<f64>,
    pub points_per_decade: usize,
}

impl Default for QuadratureControls {
    fn default() -> Self {
        Self { rho_min: 1e-6, rho_max: None, points_per_decade: 64 }
    }
}

/// Parameters selecting one potential operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub alpha: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Truncation radius; `None` is `R = ∞`.
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub quadrature: QuadratureControls,
}

fn default_p() -> f64 {
    2.0
}

impl PotentialSpec {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, p: 2.0, r: None, delta: 0.0, quadrature: QuadratureControls::default() }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn truncated(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_decay(mut self, r: f64, delta: f64) -> Self {
        self.r = Some(r);
        self.delta = delta;
        self
    }

    pub fn radius(&self) -> f64 {
        self.r.unwrap_or(f64::INFINITY)
    }

    /// `p' = p/(p-1)`.
    pub fn p_prime(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let n2 = dim as f64 + 2.0;
        if !(self.alpha > 0.0 && self.alpha < n2) {
            return invalid(format!("alpha = {} must lie in (0, N+2)", self.alpha));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return invalid(format!("p = {} must exceed 1", self.p));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) {
                return invalid(format!("R = {r} must be positive"));
            }
        }
        if !(self.delta >= 0.0 && self.delta < self.alpha) {
            return invalid(format!("delta = {} must lie in [0, alpha)", self.delta));
        }
        if self.quadrature.points_per_decade == 0 || !(self.quadrature.rho_min > 0.0) {
            return invalid("quadrature controls must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Forward,
    /// Kernel evaluated at `(x - y, s - t)`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    HeatH,
    BesselG,
    RieszE,
}

/// A kernel together with its time orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub orientation: Orientation,
}

impl Kernel {
    pub fn forward(kind: KernelKind) -> Self {
        Self { kind, orientation: Orientation::Forward }
    }

    pub fn backward(kind: KernelKind) -> Self {
        Self { kind, orientation: Orientation::Backward }
    }
}

impl From<KernelKind> for Kernel {
    fn from(kind: KernelKind) -> Self {
        Self::forward(kind)
    }
}
