//! Pointwise kernels `H_α`, `G_α`, `E_α^{R,δ}`, their convolutions with
//! measures, and exact cell integrals used by lattice discretizations.

use super::radial::{face_kinks, integrate, time_kinks, MassProfile, RadialWeight, SmoothPart};
use super::riesz::box_extent;
use super::{Kernel, KernelKind, Orientation, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, SpaceTimePoint};
use crate::measure::DiscreteMeasure;
use crate::overlap::{ball_box_volume, OverlapMode};
use quadrature::double_exponential;
use statrs::function::erf::{erf, erfc};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// `C_α = ((4π)^{N/2} Γ(α/2))^{-1}`.
pub fn heat_constant(alpha: f64, dim: usize) -> f64 {
    1.0 / ((4.0 * PI).powf(dim as f64 / 2.0) * gamma(alpha / 2.0))
}

fn parabolic_norm(x: &[f64], t: f64) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt().max((2.0 * t.abs()).sqrt())
}

/// `E_α^{R,δ}` as a function of the parabolic norm `d > 0`.
pub(crate) fn riesz_e_radial(d: f64, s: f64, r: f64, delta: f64) -> f64 {
    if r.is_infinite() {
        d.powf(-s)
    } else if delta > 0.0 {
        d.powf(-s) * (d / r).powf(-delta).min(1.0)
    } else if d < r {
        d.powf(-s)
    } else {
        0.0
    }
}

/// Value of the kernel at a space-time offset.
pub fn kernel_eval(kernel: Kernel, spec: &PotentialSpec, offset: &SpaceTimePoint) -> Result<f64> {
    let n = offset.dim();
    let t = match kernel.orientation {
        Orientation::Forward => offset.t,
        Orientation::Backward => -offset.t,
    };
    let x2: f64 = offset.x.iter().map(|v| v * v).sum();
    let alpha = spec.alpha;
    Ok(match kernel.kind {
        KernelKind::HeatH | KernelKind::BesselG => {
            if t <= 0.0 {
                return Ok(0.0);
            }
            let h = heat_constant(alpha, n) * t.powf(-(n as f64 + 2.0 - alpha) / 2.0) * (-x2 / (4.0 * t)).exp();
            if kernel.kind == KernelKind::BesselG {
                h * (-t).exp()
            } else {
                h
            }
        }
        KernelKind::RieszE => {
            let d = parabolic_norm(&offset.x, t);
            if d == 0.0 {
                return Err(Error::SingularPoint);
            }
            riesz_e_radial(d, n as f64 + 2.0 - alpha, spec.radius(), spec.delta)
        }
    })
}

/// `(K * μ)(z)`: exact over atoms, exact cell integrals over the density.
pub fn kernel_convolve(mu: &DiscreteMeasure, kernel: Kernel, spec: &PotentialSpec, z: &SpaceTimePoint) -> Result<f64> {
    if z.dim() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: z.dim() });
    }
    mu.require_nonnegative()?;
    let mut total = 0.0;
    let mut off = SpaceTimePoint::origin(mu.dim);
    for a in &mu.atoms {
        for i in 0..mu.dim {
            off.x[i] = z.x[i] - a.x[i];
        }
        off.t = z.t - a.t;
        total += a.mass * kernel_eval(kernel, spec, &off)?;
    }
    if let Some(d) = &mu.density {
        let m = d.grid.spatial_len();
        let steps = if d.slab { 1 } else { d.grid.steps };
        for k in 0..steps {
            let tw = if d.slab { (0.0, 0.0) } else { d.grid.time_bounds(k) };
            for s in 0..m {
                let v = d.values[k * m + s];
                if v == 0.0 {
                    continue;
                }
                let (lo, hi) = d.grid.spatial_bounds(s);
                total += v * cell_kernel_integral(kernel, spec, z, &lo, &hi, tw);
            }
        }
    }
    Ok(total)
}

/// `∫ σ(y) dy` difference of Gaussians: `∫_lo^hi exp(-(x-y)²/4τ) dy / sqrt(πτ)`.
fn erf_window(x: f64, lo: f64, hi: f64, sq: f64) -> f64 {
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

/// Integrand in the time lag `τ > 0` of a heat-type kernel over a spatial box.
fn heat_lag_density(alpha: f64, x: &[f64], lo: &[f64], hi: &[f64], tau: f64, bessel: bool) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let n = x.len();
    let sq = tau.sqrt();
    let mut prod = 1.0;
    for i in 0..n {
        prod *= erf_window(x[i], lo[i], hi[i], sq);
        if prod == 0.0 {
            return 0.0;
        }
    }
    let v = heat_constant(alpha, n) * PI.powf(n as f64 / 2.0) * tau.powf(alpha / 2.0 - 1.0) * prod;
    if bessel {
        v * (-tau).exp()
    } else {
        v
    }
}

/// `∫_a^b f` by double-exponential quadrature on geometric sub-intervals.
pub(crate) fn lag_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![b];
    let floor = a.max(b * 1e-10);
    let mut c = b;
    while c / 8.0 > floor {
        c /= 8.0;
        cuts.push(c);
    }
    cuts.push(a);
    cuts.reverse();
    cuts.dedup();
    cuts.windows(2)
        .map(|w| double_exponential::integrate(&f, w[0], w[1], 1e-15 * (w[1] - w[0]).max(1e-300)).integral)
        .sum()
}

/// Radial mass profile of `ρ ↦ |Q̃_ρ(x,t) ∩ box|` (or of the spatial ball when `spatial_only`).
pub(crate) fn box_profile<'a>(
    x: &'a [f64],
    t: f64,
    lo: &'a [f64],
    hi: &'a [f64],
    tw: (f64, f64),
    spatial_only: bool,
    rho_min: f64,
) -> MassProfile<'a> {
    let n = x.len();
    let slab = !spatial_only && tw.0 == tw.1;
    let (tlo, thi) = if spatial_only { (t, t) } else { tw };
    let mass = move |r: f64| {
        let a = ball_box_volume(x, r, lo, hi, OverlapMode::Exact);
        if a == 0.0 || spatial_only {
            return a;
        }
        let (wlo, whi) = (t - r * r / 2.0, t + r * r / 2.0);
        if slab {
            if wlo <= tlo && tlo < whi {
                a
            } else {
                0.0
            }
        } else {
            a * (whi.min(thi) - wlo.max(tlo)).max(0.0)
        }
    };
    let (rho_in, rho_out) = box_extent(x, t, lo, hi, tlo, thi);
    let total = if spatial_only || slab {
        (0..n).map(|i| hi[i] - lo[i]).product::<f64>()
    } else {
        (0..n).map(|i| hi[i] - lo[i]).product::<f64>() * (thi - tlo)
    };
    let mut near = None;
    if rho_in == 0.0 {
        let k = if spatial_only || slab { n as f64 } else { n as f64 + 2.0 };
        let mut r0 = (0..n).map(|i| (x[i] - lo[i]).min(hi[i] - x[i])).fold(f64::INFINITY, f64::min);
        if !spatial_only && !slab {
            r0 = r0.min((2.0 * (t - tlo).min(thi - t)).sqrt());
        }
        let scale = (0..n).map(|i| hi[i] - lo[i]).fold(f64::INFINITY, f64::min);
        let floor = rho_min * scale;
        near = Some(if r0 > floor { (r0, unit_ball_volume(n), k) } else { (floor, mass(floor) / floor.powf(k), k) });
    }
    let planes: Vec<Vec<f64>> = (0..n).map(|i| vec![lo[i], hi[i]]).collect();
    let mut kinks = face_kinks(x, &planes, 1 << 12);
    if !spatial_only && !slab {
        kinks.extend(time_kinks(t, &[tlo, thi]));
    }
    MassProfile::new(Vec::new(), Some(SmoothPart { mass: Box::new(mass), rho_in, rho_out, total, near, kinks }))
}

/// Layer-cake weight turning `∫ V(ρ) ψ(ρ) dρ/ρ` into `∫_box E_α^{R,δ}`.
pub(crate) fn riesz_layer_weight(s: f64, r: f64, delta: f64) -> RadialWeight {
    if r.is_infinite() {
        RadialWeight { r, delta: 0.0, below: s, above: s, jump: 0.0 }
    } else if delta > 0.0 {
        RadialWeight { r, delta, below: s, above: s + delta, jump: 0.0 }
    } else {
        RadialWeight { r, delta: 0.0, below: s, above: 0.0, jump: 1.0 }
    }
}

/// `∫_{box} K(z - y) dy` over `lo..hi × [t0, t1]`; `t0 == t1` integrates over
/// the spatial box on that time slice (a slab density).
pub fn cell_kernel_integral(kernel: Kernel, spec: &PotentialSpec, z: &SpaceTimePoint, lo: &[f64], hi: &[f64], tw: (f64, f64)) -> f64 {
    let n = z.dim();
    match kernel.kind {
        KernelKind::HeatH | KernelKind::BesselG => {
            let bessel = kernel.kind == KernelKind::BesselG;
            let f = |tau: f64| heat_lag_density(spec.alpha, &z.x, lo, hi, tau, bessel);
            let (a, b) = match kernel.orientation {
                Orientation::Forward => (z.t - tw.1, z.t - tw.0),
                Orientation::Backward => (tw.0 - z.t, tw.1 - z.t),
            };
            if tw.0 == tw.1 {
                return f(a);
            }
            lag_integral(f, a.max(0.0), b)
        }
        KernelKind::RieszE => {
            let s = n as f64 + 2.0 - spec.alpha;
            let profile = box_profile(&z.x, z.t, lo, hi, tw, false, spec.quadrature.rho_min);
            let w = riesz_layer_weight(s, spec.radius(), spec.delta);
            integrate(&profile, s, 1.0, &w, spec.quadrature.points_per_decade)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::measure::{Atom, Density};
    use crate::potentials::riesz_potential;
    use proptest::prelude::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn kernel_examples() {
        let spec = PotentialSpec::new(2.0);
        let h = kernel_eval(Kernel::forward(KernelKind::HeatH), &spec, &pt(&[0.0], 1.0)).unwrap();
        assert!((h - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((h - 0.28209).abs() < 1e-5);
        for a in [0.5, 1.0, 2.0, 3.5] {
            let z = kernel_eval(Kernel::forward(KernelKind::HeatH), &PotentialSpec::new(a), &pt(&[0.3], -1.0)).unwrap();
            assert_eq!(z, 0.0);
        }
        let g = kernel_eval(Kernel::forward(KernelKind::BesselG), &spec, &pt(&[0.0], 1.0)).unwrap();
        assert!((g - (-1f64).exp() * (4.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((g - 0.10378).abs() < 1e-5);
        let b = kernel_eval(Kernel::backward(KernelKind::HeatH), &spec, &pt(&[0.2], -0.5)).unwrap();
        let f = kernel_eval(Kernel::forward(KernelKind::HeatH), &spec, &pt(&[0.2], 0.5)).unwrap();
        assert_eq!(b, f);
        assert_eq!(
            kernel_eval(Kernel::forward(KernelKind::RieszE), &spec, &pt(&[0.0], 0.0)),
            Err(Error::SingularPoint)
        );
    }

    #[test]
    fn dirac_convolution_is_kernel() {
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let spec = PotentialSpec::new(2.0);
        for z in [pt(&[0.3, 0.1], 0.2), pt(&[1.0, -1.0], 2.0), pt(&[0.0, 0.5], -0.2)] {
            let c = kernel_convolve(&mu, Kernel::forward(KernelKind::HeatH), &spec, &z).unwrap();
            let k = kernel_eval(Kernel::forward(KernelKind::HeatH), &spec, &z).unwrap();
            assert_eq!(c, k);
            let b = kernel_convolve(&mu, Kernel::backward(KernelKind::HeatH), &spec, &z).unwrap();
            let r = kernel_eval(Kernel::forward(KernelKind::HeatH), &spec, &pt(&z.x, -z.t)).unwrap();
            assert_eq!(b, r);
        }
    }

    #[test]
    fn heat_cell_integral_against_midpoint_oracle() {
        let spec = PotentialSpec::new(1.3);
        let z = pt(&[0.35, -0.1], 0.9);
        let (lo, hi, tw) = ([0.0, 0.0], [0.5, 0.25], (0.2, 0.6));
        let v = cell_kernel_integral(Kernel::forward(KernelKind::BesselG), &spec, &z, &lo, &hi, tw);
        let n = 60;
        let mut o = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let y = [(i as f64 + 0.5) / n as f64 * 0.5, (j as f64 + 0.5) / n as f64 * 0.25];
                    let s = 0.2 + (k as f64 + 0.5) / n as f64 * 0.4;
                    o += kernel_eval(Kernel::forward(KernelKind::BesselG), &spec, &pt(&[z.x[0] - y[0], z.x[1] - y[1]], z.t - s)).unwrap();
                }
            }
        }
        o *= 0.5 * 0.25 * 0.4 / (n * n * n) as f64;
        assert!((v - o).abs() < 1e-3 * o, "{v} vs {o}");
    }

    #[test]
    fn riesz_cell_integral_against_midpoint_oracle() {
        let spec = PotentialSpec::new(1.0).with_decay(0.8, 0.4);
        let z = pt(&[0.9], 0.7);
        let (lo, hi, tw) = ([0.0], [0.5], (0.0, 0.3));
        let v = cell_kernel_integral(Kernel::forward(KernelKind::RieszE), &spec, &z, &lo, &hi, tw);
        let n = 1000;
        let mut o = 0.0;
        for i in 0..n {
            for k in 0..n {
                let y = (i as f64 + 0.5) / n as f64 * 0.5;
                let s = (k as f64 + 0.5) / n as f64 * 0.3;
                o += kernel_eval(Kernel::forward(KernelKind::RieszE), &spec, &pt(&[z.x[0] - y], z.t - s)).unwrap();
            }
        }
        o *= 0.5 * 0.3 / (n * n) as f64;
        assert!((v - o).abs() < 1e-4 * o, "{v} vs {o}");
    }

    #[test]
    fn riesz_e_density_identity() {
        // E_α * μ = (N+2-α) I_α[μ] also holds for densities
        let g = GridSpec::cube(1, 0.5, 3, 0.0, 0.5, 2).unwrap();
        let vals = vec![1.0, 2.0, 0.5, 0.0, 1.5, 1.0];
        let mu = DiscreteMeasure::from_density(Density::new(g, vals).unwrap()).unwrap();
        let spec = PotentialSpec::new(1.2);
        for z in [pt(&[0.9], 0.7), pt(&[0.1], 0.2), pt(&[-0.3], -0.5)] {
            let e = kernel_convolve(&mu, Kernel::forward(KernelKind::RieszE), &spec, &z).unwrap();
            let i = riesz_potential(&mu, &spec, &z).unwrap();
            assert!((e / i - 1.8).abs() < 1e-6, "{}", e / i);
        }
    }

    proptest! {
        #[test]
        fn bessel_below_heat(x in -2.0f64..2.0, t in -1.0f64..3.0, alpha in 0.3f64..2.5) {
            let mu = DiscreteMeasure::new(1, vec![Atom::new(vec![0.0], 0.0, 1.0), Atom::new(vec![0.5], -0.5, 0.3)], None).unwrap();
            let spec = PotentialSpec::new(alpha);
            let z = pt(&[x], t);
            let g = kernel_convolve(&mu, Kernel::forward(KernelKind::BesselG), &spec, &z).unwrap();
            let h = kernel_convolve(&mu, Kernel::forward(KernelKind::HeatH), &spec, &z).unwrap();
            prop_assert!(g <= h);
        }

        #[test]
        fn decayed_riesz_below_plain(x in -2.0f64..2.0, t in -2.0f64..2.0, r in 0.1f64..2.0, delta in 0.0f64..0.9) {
            let z = pt(&[x, 0.1], t);
            prop_assume!(x != 0.0 || t != 0.0);
            let a = kernel_eval(Kernel::forward(KernelKind::RieszE), &PotentialSpec::new(1.0).with_decay(r, delta), &z).unwrap();
            let b = kernel_eval(Kernel::forward(KernelKind::RieszE), &PotentialSpec::new(1.0), &z).unwrap();
            prop_assert!(a <= b);
        }
    }
}
