//! Riesz, Wolff and fractional maximal potentials built on centered cylinders.

use super::radial::{face_kinks, integrate, supremum, time_kinks, MassProfile, RadialWeight, SmoothPart};
use crate::grid::GridSpec;
use super::{PotentialSpec, QuadratureControls};
use crate::error::{invalid, Error, Result};
use crate::geometry::{parabolic_distance_raw, unit_ball_volume, SpaceTimePoint};
use crate::measure::{centered, density_in_cylinder, Density, DiscreteMeasure};
use crate::overlap::OverlapMode;
use serde::{Deserialize, Serialize};

/// Distance from `v` to the interval `[lo, hi]`.
fn gap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

/// Radii between which the centered cylinders around `z` start meeting and
/// finish enclosing the box `lo..hi × [tlo, thi]`.
pub(crate) fn box_extent(x: &[f64], t: f64, lo: &[f64], hi: &[f64], tlo: f64, thi: f64) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for i in 0..x.len() {
        let g = gap(x[i], lo[i], hi[i]);
        near += g * g;
        let f = (x[i] - lo[i]).abs().max((x[i] - hi[i]).abs());
        far += f * f;
    }
    let tin = (2.0 * gap(t, tlo, thi)).sqrt();
    let tout = (2.0 * (t - tlo).max(thi - t)).sqrt();
    (near.sqrt().max(tin), far.sqrt().max(tout))
}

/// Edge and corner radii are only resolved on grids with few faces.
pub(crate) const KINK_CAP: usize = 1 << 10;

pub(crate) fn grid_planes(g: &GridSpec) -> Vec<Vec<f64>> {
    (0..g.dim()).map(|i| (0..=g.cells[i]).map(|j| g.corner[i] + j as f64 * g.h(i)).collect()).collect()
}

fn density_profile<'a>(d: &'a Density, z: &SpaceTimePoint, q: &QuadratureControls) -> Option<SmoothPart<'a>> {
    let (lo, hi, tlo, thi) = d.support_box()?;
    let (rho_in, mut rho_out) = box_extent(&z.x, z.t, &lo, &hi, tlo, thi);
    if let Some(r) = q.rho_max {
        rho_out = rho_out.min(r).max(rho_in);
    }
    let total = d.values.iter().sum::<f64>() * d.cell_volume();
    let zc = z.clone();
    let mass = move |r: f64| density_in_cylinder(d, &centered(&zc.x, zc.t, r), OverlapMode::Exact);
    let n = d.grid.dim();
    let mut near = None;
    if rho_in == 0.0 {
        let hmin = (0..n).map(|i| d.grid.h(i)).fold(f64::INFINITY, f64::min);
        let (k, scale) = if d.slab { (n as f64, hmin) } else { ((n + 2) as f64, hmin.min((2.0 * d.grid.tau()).sqrt())) };
        let floor = q.rho_min * scale;
        let mut found = None;
        if let Some(s) = d.grid.locate_spatial(&z.x) {
            let (a, b) = d.grid.spatial_bounds(s);
            let mut r0 = (0..n).map(|i| (z.x[i] - a[i]).min(b[i] - z.x[i])).fold(f64::INFINITY, f64::min);
            let val = if d.slab {
                Some(d.values[s])
            } else {
                d.grid.locate_time(z.t).map(|kt| {
                    let (ta, tb) = d.grid.time_bounds(kt);
                    r0 = r0.min((2.0 * (z.t - ta).min(tb - z.t)).sqrt());
                    d.values[kt * d.grid.spatial_len() + s]
                })
            };
            if let Some(v) = val {
                if r0 > floor {
                    found = Some((r0, v * unit_ball_volume(n), k));
                }
            }
        }
        near = Some(found.unwrap_or_else(|| (floor, mass(floor) / floor.powf(k), k)));
    }
    let mut kinks = face_kinks(&z.x, &grid_planes(&d.grid), KINK_CAP);
    if !d.slab {
        let faces: Vec<f64> = (0..=d.grid.steps).map(|k| d.grid.t0 + k as f64 * d.grid.tau()).collect();
        kinks.extend(time_kinks(z.t, &faces));
    }
    Some(SmoothPart { mass: Box::new(mass), rho_in, rho_out, total, near, kinks })
}

/// Mass profile of `ρ ↦ μ(Q̃_ρ(z))`.
pub(crate) fn parabolic_profile<'a>(mu: &'a DiscreteMeasure, z: &SpaceTimePoint, q: &QuadratureControls) -> MassProfile<'a> {
    let atoms = mu.atoms.iter().map(|a| (parabolic_distance_raw(&z.x, z.t, &a.x, a.t), a.mass)).collect();
    let smooth = mu.density.as_ref().and_then(|d| density_profile(d, z, q));
    MassProfile::new(atoms, smooth)
}

fn check(mu: &DiscreteMeasure, spec: &PotentialSpec, z: &SpaceTimePoint) -> Result<()> {
    if z.dim() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: z.dim() });
    }
    spec.validate(mu.dim)?;
    mu.require_nonnegative()
}

/// `I_α^{R,δ}[μ](z) = ∫_0^∞ μ(Q̃_ρ(z)) ρ^{-(N+2-α)} min{1,(ρ/R)^{-δ}} dρ/ρ`
/// (truncated at `R` when `δ = 0`).
pub fn riesz_potential(mu: &DiscreteMeasure, spec: &PotentialSpec, z: &SpaceTimePoint) -> Result<f64> {
    check(mu, spec, z)?;
    let s = mu.dim as f64 + 2.0 - spec.alpha;
    let profile = parabolic_profile(mu, z, &spec.quadrature);
    let w = RadialWeight::potential(spec.radius(), spec.delta);
    Ok(integrate(&profile, s, 1.0, &w, spec.quadrature.points_per_decade))
}

/// `W_{α,p}^{R,δ}[μ](z) = ∫_0^∞ (μ(Q̃_ρ(z)) ρ^{-(N+2-αp)})^{1/(p-1)} min{1,(ρ/R)^{-δ}} dρ/ρ`.
pub fn wolff_potential(mu: &DiscreteMeasure, spec: &PotentialSpec, z: &SpaceTimePoint) -> Result<f64> {
    check(mu, spec, z)?;
    let s = mu.dim as f64 + 2.0 - spec.alpha * spec.p;
    if s < 0.0 {
        return invalid("alpha p must not exceed N+2");
    }
    if s == 0.0 && spec.r.is_none() {
        return invalid("alpha p = N+2 needs a finite truncation radius");
    }
    let profile = parabolic_profile(mu, z, &spec.quadrature);
    let w = RadialWeight::potential(spec.radius(), spec.delta);
    Ok(integrate(&profile, s, 1.0 / (spec.p - 1.0), &w, spec.quadrature.points_per_decade))
}

/// `M_α^R[μ](z) = sup_{0<ρ<R} μ(Q̃_ρ(z)) ρ^{-(N+2-α)}`.
pub fn maximal_potential(mu: &DiscreteMeasure, spec: &PotentialSpec, z: &SpaceTimePoint) -> Result<f64> {
    if z.dim() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: z.dim() });
    }
    if !(spec.alpha >= 0.0 && spec.alpha < mu.dim as f64 + 2.0) {
        return invalid(format!("alpha = {} must lie in [0, N+2)", spec.alpha));
    }
    mu.require_nonnegative()?;
    let s = mu.dim as f64 + 2.0 - spec.alpha;
    let profile = parabolic_profile(mu, z, &spec.quadrature);
    Ok(supremum(&profile, s, spec.radius(), spec.quadrature.points_per_decade))
}

/// Operator selector used by batch evaluation and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Riesz,
    Maximal,
    Wolff,
    Heat,
    Bessel,
    Dyadic,
    Lowersum,
}

/// Evaluates one operator at every point.
pub fn evaluate_many(kind: PotentialKind, mu: &DiscreteMeasure, spec: &PotentialSpec, points: &[SpaceTimePoint]) -> Result<Vec<f64>> {
    use super::{dyadic_wolff, discrete_lower_sum, kernel_convolve, DyadicRange, Kernel, KernelKind};
    points
        .iter()
        .map(|z| match kind {
            PotentialKind::Riesz => riesz_potential(mu, spec, z),
            PotentialKind::Maximal => maximal_potential(mu, spec, z),
            PotentialKind::Wolff => wolff_potential(mu, spec, z),
            PotentialKind::Heat => kernel_convolve(mu, Kernel::forward(KernelKind::HeatH), spec, z),
            PotentialKind::Bessel => kernel_convolve(mu, Kernel::forward(KernelKind::BesselG), spec, z),
            PotentialKind::Dyadic => dyadic_wolff(mu, spec, z, DyadicRange::Auto),
            PotentialKind::Lowersum => discrete_lower_sum(mu, z, spec.radius()),
        })
        .collect()
}
