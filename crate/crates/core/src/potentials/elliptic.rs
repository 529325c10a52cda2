//! Potentials on `ℝ^N` of the spatial projection `μ_1(A) = μ(A × ℝ)`.

use super::kernels::{box_profile, heat_constant, lag_integral};
use super::radial::{face_kinks, integrate, MassProfile, RadialWeight, SmoothPart};
use super::riesz::{box_extent, grid_planes, KINK_CAP};
use crate::error::{invalid, Error, Result};
use crate::geometry::{spatial_distance, unit_ball_volume};
use crate::measure::DiscreteMeasure;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use std::f64::consts::PI;

/// Spatial kernels for elliptic capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticKind {
    /// `|x|^{-(N-β)}`
    Riesz,
    /// `∫_0^∞ G_β(x, t) dt`
    Bessel,
}

fn spatial_profile<'a>(mu: &'a DiscreteMeasure, x: &'a [f64], rho_min: f64) -> MassProfile<'a> {
    let atoms = mu.atoms.iter().map(|a| (spatial_distance(&a.x, x), a.mass)).collect();
    let smooth = mu.density.as_ref().and_then(|d| {
        let (lo, hi, _, _) = d.support_box()?;
        let (rho_in, rho_out) = box_extent(x, 0.0, &lo, &hi, 0.0, 0.0);
        let n = x.len();
        let m = d.grid.spatial_len();
        let steps = if d.slab { 1 } else { d.grid.steps };
        let w = if d.slab { 1.0 } else { d.grid.tau() };
        let column = move |s: usize| (0..steps).map(|k| d.values[k * m + s]).sum::<f64>() * w;
        let total = (0..m).map(column).sum::<f64>() * d.grid.spatial_cell_volume();
        let mass = move |r: f64| {
            d.ball_overlaps(x, r, crate::overlap::OverlapMode::Exact).iter().map(|(s, a)| a * column(*s)).sum::<f64>()
        };
        let mut near = None;
        if rho_in == 0.0 {
            let hmin = (0..n).map(|i| d.grid.h(i)).fold(f64::INFINITY, f64::min);
            let floor = rho_min * hmin;
            let cell = d.grid.locate_spatial(x).and_then(|s| {
                let (a, b) = d.grid.spatial_bounds(s);
                let r0 = (0..n).map(|i| (x[i] - a[i]).min(b[i] - x[i])).fold(f64::INFINITY, f64::min);
                (r0 > floor).then(|| (r0, column(s) * unit_ball_volume(n), n as f64))
            });
            near = Some(cell.unwrap_or_else(|| (floor, mass(floor) / floor.powi(n as i32), n as f64)));
        }
        let kinks = face_kinks(x, &grid_planes(&d.grid), KINK_CAP);
        Some(SmoothPart { mass: Box::new(mass), rho_in, rho_out, total, near, kinks })
    });
    MassProfile::new(atoms, smooth)
}

/// `I_α[μ_1](x) = ∫_0^∞ μ_1(B_ρ(x)) ρ^{-(N-α)} dρ/ρ` for `0 < α < N`.
pub fn elliptic_riesz_potential(mu: &DiscreteMeasure, alpha: f64, x: &[f64]) -> Result<f64> {
    if x.len() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: x.len() });
    }
    let n = mu.dim as f64;
    if !(alpha > 0.0 && alpha < n) {
        return invalid(format!("alpha = {alpha} must lie in (0, N)"));
    }
    mu.require_nonnegative()?;
    let profile = spatial_profile(mu, x, 1e-6);
    let w = RadialWeight::potential(f64::INFINITY, 0.0);
    Ok(integrate(&profile, n - alpha, 1.0, &w, 64))
}

fn window(x: f64, lo: f64, hi: f64, sq: f64) -> f64 {
    let a = (x - lo) / (2.0 * sq);
    let b = (x - hi) / (2.0 * sq);
    if b >= 0.0 {
        erfc(b) - erfc(a)
    } else if a <= 0.0 {
        erfc(-a) - erfc(-b)
    } else {
        erf(a) - erf(b)
    }
}

/// Spatial Bessel kernel `∫_0^∞ G_β(x,t) dt` at `x ≠ 0`.
pub fn elliptic_bessel_kernel(beta: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let c = heat_constant(beta, n);
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            c * t.powf(-(n as f64 + 2.0 - beta) / 2.0) * (-r2 / (4.0 * t) - t).exp()
        }
    };
    lag_integral(f, 0.0, 60.0)
}

/// `∫_{lo..hi} K(x - y) dy` for a spatial kernel.
pub(crate) fn elliptic_cell_integral(kind: EllipticKind, beta: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = x.len();
    match kind {
        EllipticKind::Riesz => {
            let s = n as f64 - beta;
            let profile = box_profile(x, 0.0, lo, hi, (0.0, 0.0), true, 1e-6);
            let w = RadialWeight { r: f64::INFINITY, delta: 0.0, below: s, above: s, jump: 0.0 };
            integrate(&profile, s, 1.0, &w, 64)
        }
        EllipticKind::Bessel => {
            let c = heat_constant(beta, n) * PI.powf(n as f64 / 2.0);
            let f = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let sq = t.sqrt();
                let mut prod = 1.0;
                for i in 0..n {
                    prod *= window(x[i], lo[i], hi[i], sq);
                }
                c * t.powf(beta / 2.0 - 1.0) * (-t).exp() * prod
            };
            lag_integral(f, 0.0, 60.0)
        }
    }
}
