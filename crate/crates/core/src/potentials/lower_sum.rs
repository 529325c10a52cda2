//! Discrete sums over backward cylinders that bound solutions from below.

use crate::error::{Error, Result};
use crate::geometry::{parabolic_distance_raw, CylinderVariant, ParabolicCylinder, SpaceTimePoint};
use crate::measure::DiscreteMeasure;
use super::riesz::box_extent;

/// Cylinder `k` lies within this multiple of `r_k` from `z` in parabolic distance.
const REACH: f64 = 0.78;

/// `Σ_k μ(Q_{r_k/8}(y, s - 35 r_k²/128)) / r_k^N` with `r_k = 4^{-k} r`, summed
/// over `k ≥ 0` for finite `r` and over all `k ∈ ℤ` (with `r = 1`) for `r = ∞`.
pub fn discrete_lower_sum(mu: &DiscreteMeasure, z: &SpaceTimePoint, r: f64) -> Result<f64> {
    if z.dim() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: z.dim() });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("lower-sum radius {r}")));
    }
    mu.require_nonnegative()?;
    let n = mu.dim as i32;
    let mut t_min = f64::INFINITY;
    let mut d_min = f64::INFINITY;
    for a in &mu.atoms {
        if a.mass != 0.0 {
            t_min = t_min.min(a.t);
            d_min = d_min.min(parabolic_distance_raw(&z.x, z.t, &a.x, a.t));
        }
    }
    let mut has_density = false;
    if let Some(d) = &mu.density {
        if let Some((lo, hi, tlo, thi)) = d.support_box() {
            has_density = true;
            t_min = t_min.min(tlo);
            d_min = d_min.min(box_extent(&z.x, z.t, &lo, &hi, tlo, thi).0);
        }
    }
    let lag = z.t - t_min;
    if !(lag > 0.0) {
        return Ok(0.0);
    }
    let (base, k_lo) = if r.is_finite() {
        (r, 0i64)
    } else {
        // cylinders with 35 r_k²/128 > lag lie entirely before the support
        let x = lag * 128.0 / 35.0;
        (1.0, (-(x.log2()) / 4.0).floor() as i64 - 1)
    };
    let mut sum = 0.0;
    let mut k = k_lo;
    loop {
        let rk = base * 4f64.powi(-(k as i32));
        if REACH * rk < d_min {
            break;
        }
        let c = ParabolicCylinder {
            center: SpaceTimePoint::new(z.x.clone(), z.t - 35.0 / 128.0 * rk * rk),
            radius: rk / 8.0,
            variant: CylinderVariant::Backward,
        };
        let term = mu.cylinder_measure(&c) / rk.powi(n);
        sum += term;
        if has_density && term <= 1e-17 * sum && k - k_lo > 8 {
            break;
        }
        if k - k_lo > 200 {
            break;
        }
        k += 1;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::measure::{Atom, Density};

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn lower_sum_examples() {
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let v = discrete_lower_sum(&mu, &pt(&[0.0, 0.0], 35.0 / 128.0), f64::INFINITY).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(discrete_lower_sum(&mu, &pt(&[0.0, 0.0], -0.3), f64::INFINITY).unwrap(), 0.0);
        let z = pt(&[0.01, 0.0], 0.3);
        let a = discrete_lower_sum(&mu, &z, f64::INFINITY).unwrap();
        let b = discrete_lower_sum(&mu.scaled(2.0), &z, f64::INFINITY).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn enumeration_oracle() {
        // brute force over a wide k range against the truncated enumeration
        let mu = DiscreteMeasure::new(
            1,
            vec![Atom::new(vec![0.0], 0.0, 1.0), Atom::new(vec![0.02], -0.001, 0.5), Atom::new(vec![-0.3], 0.2, 2.0)],
            None,
        )
        .unwrap();
        for (z, r) in [(pt(&[0.0], 0.004), f64::INFINITY), (pt(&[0.01], 0.3), 1.0), (pt(&[-0.29], 0.21), f64::INFINITY)] {
            let mut brute = 0.0;
            let (base, k0) = if r.is_finite() { (r, 0) } else { (1.0, -30) };
            for k in k0..40 {
                let rk = base * 4f64.powi(-k);
                let c = ParabolicCylinder::backward(pt(&z.x, z.t - 35.0 / 128.0 * rk * rk), rk / 8.0).unwrap();
                brute += mu.cylinder_measure(&c) / rk;
            }
            let v = discrete_lower_sum(&mu, &z, r).unwrap();
            assert!((v - brute).abs() <= 1e-14 * brute.max(1.0), "{v} vs {brute}");
        }
    }

    #[test]
    fn density_terms_decay_geometrically() {
        let g = GridSpec::cube(1, 1.0, 4, -1.0, 0.0, 4).unwrap();
        let mu = DiscreteMeasure::from_density(Density::new(g, vec![1.0; 16]).unwrap()).unwrap();
        let v = discrete_lower_sum(&mu, &pt(&[0.1], -0.2), 1.0).unwrap();
        // k = 0 term alone: |B_{1/8}| (1/8)² with the cylinder inside the support
        let first = 0.25 * (1.0 / 64.0);
        assert!(v > first && v < first * 16.0 / 15.0 * 1.0001, "{v}");
    }
}
