//! Positive weights and the `A_∞` pair check.

use crate::error::{invalid, Error, Result};
use crate::geometry::spatial_distance;
use crate::grid::{GridFunction, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Cellwise positive density of the measure `dw = w dx dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub values: GridFunction,
    /// Declared `(C, ν)` with `w(E) ≤ C (|E|/|Q|)^ν w(Q)`.
    #[serde(default)]
    pub a_infinity: Option<(f64, f64)>,
}

/// Outcome of a sampled `A_∞` check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AInfinityCheck {
    /// Smallest `C` that works for the declared `ν` on every sample.
    pub needed_c: f64,
    pub holds: bool,
    pub samples: usize,
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        let w = Self { values, a_infinity: None };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(grid: &GridSpec) -> Self {
        Self { values: GridFunction::new(grid.clone(), vec![1.0; grid.len()]).expect("valid grid"), a_infinity: None }
    }

    pub fn with_a_infinity(mut self, c: f64, nu: f64) -> Self {
        self.a_infinity = Some((c, nu));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.values.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight values must be positive, found {v}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.values.grid
    }

    /// `w(cell j)`.
    pub fn cell_mass(&self, j: usize) -> f64 {
        self.values.values[j] * self.values.grid.cell_volume()
    }

    /// Spot-checks the declared `A_∞` pair on `samples` random cylinders `Q`.
    /// For each `Q` (cells with centers in a random centered cylinder) the
    /// worst subsets `E` of every size are the heaviest cells, so the check is
    /// exact over cell unions inside the sampled `Q`.
    pub fn check_a_infinity(&self, samples: usize, seed: u64) -> Result<AInfinityCheck> {
        let Some((c, nu)) = self.a_infinity else {
            return invalid("no A_infinity pair declared");
        };
        if !(c > 0.0 && nu > 0.0) {
            return invalid("A_infinity pair needs C > 0 and nu > 0");
        }
        let g = self.grid();
        let n = g.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = g.diameter().max((2.0 * (g.t1 - g.t0)).sqrt());
        let mut needed: f64 = 0.0;
        let mut used = 0;
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|i| g.corner[i] + rng.gen::<f64>() * g.sides[i]).collect();
            let t = g.t0 + rng.gen::<f64>() * (g.t1 - g.t0);
            let r = scale * rng.gen_range(0.05..0.6);
            let mut cells: Vec<f64> = (0..g.len())
                .filter(|&j| {
                    let (k, s) = g.split(j);
                    let tc = g.time_center(k);
                    spatial_distance(&g.spatial_center(s), &x) < r && tc >= t - r * r / 2.0 && tc < t + r * r / 2.0
                })
                .map(|j| self.values.values[j])
                .collect();
            if cells.is_empty() {
                continue;
            }
            used += 1;
            cells.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let total: f64 = cells.iter().sum();
            let count = cells.len() as f64;
            let mut acc = 0.0;
            for (k, v) in cells.iter().enumerate() {
                acc += v;
                needed = needed.max((acc / total) / ((k + 1) as f64 / count).powf(nu));
            }
        }
        Ok(AInfinityCheck { needed_c: needed, holds: needed <= c * (1.0 + 1e-12), samples: used })
    }
}
