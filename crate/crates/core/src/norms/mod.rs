//! Lorentz and Lorentz–Morrey norms of grid functions, `A_∞` weights and the
//! empirical good-λ and norm-equivalence checks.

mod checks;
mod lorentz;
mod weight;

pub use checks::{
    exp_integrability_check, good_lambda_check, norm_equivalence_report, potentials_on_grid, weak_mapping_check,
    ExpIntegrabilityOptions, GoodLambdaGrid, WeakMapOptions, WeakMapVariant,
};
pub use lorentz::{lorentz_morrey_norm, lorentz_morrey_scan, lorentz_norm, MorreyScan};
pub use weight::{AInfinityCheck, Weight};

use crate::error::{invalid, Result};
use crate::report::num_f64;
use serde::{Deserialize, Serialize};

/// Localization of a Lorentz norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Morrey {
    #[default]
    None,
    /// Sup over centered cylinders with the factor `ρ^{(κ-N-2)/q}`.
    Calorie { kappa: f64 },
    /// Sup over spatial balls times the full time range with `ρ^{(θ-N)/q}`.
    Spatial { theta: f64 },
}

/// Axis-aligned sub-box `lo..hi × [t0, t1]` of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub q: f64,
    /// Second Lorentz index; `inf` selects the weak space.
    #[serde(with = "num_f64")]
    pub s: f64,
    #[serde(default)]
    pub morrey: Morrey,
    #[serde(default)]
    pub weight: Option<Weight>,
    #[serde(default)]
    pub domain: Option<DomainBox>,
}

impl NormSpec {
    pub fn lorentz(q: f64, s: f64) -> Self {
        Self { q, s, morrey: Morrey::None, weight: None, domain: None }
    }

    pub fn calorie(q: f64, s: f64, kappa: f64) -> Self {
        Self { morrey: Morrey::Calorie { kappa }, ..Self::lorentz(q, s) }
    }

    pub fn spatial(q: f64, s: f64, theta: f64) -> Self {
        Self { morrey: Morrey::Spatial { theta }, ..Self::lorentz(q, s) }
    }

    pub fn with_weight(mut self, w: Weight) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn with_domain(mut self, d: DomainBox) -> Self {
        self.domain = Some(d);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return invalid(format!("q = {} must be positive and finite", self.q));
        }
        if !(self.s > 0.0) {
            return invalid(format!("s = {} must be positive", self.s));
        }
        let n = dim as f64;
        match self.morrey {
            Morrey::None => {}
            Morrey::Calorie { kappa } if !(kappa > 0.0 && kappa <= n + 2.0) => {
                return invalid(format!("kappa = {kappa} must lie in (0, N+2]"))
            }
            Morrey::Spatial { theta } if !(theta > 0.0 && theta <= n) => {
                return invalid(format!("theta = {theta} must lie in (0, N]"))
            }
            _ => {}
        }
        if let Some(d) = &self.domain {
            if d.lo.len() != dim || d.hi.len() != dim || (0..dim).any(|i| !(d.lo[i] < d.hi[i])) || !(d.t0 < d.t1) {
                return invalid("domain box must be nonempty and match the grid dimension");
            }
        }
        Ok(())
    }
}
