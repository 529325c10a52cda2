//! Dyadic approximation of the Wolff potential through the kernel
//! `Σ_n 2^{n(N+2-α)} χ_{Q̃_{2^{-n}}}`.

use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::geometry::{parabolic_distance_raw, spatial_distance, unit_ball_volume, SpaceTimePoint};
use crate::measure::{centered, DiscreteMeasure};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// Range of dyadic scales `n` (radius `2^{-n}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DyadicRange {
    /// Every scale that can see the measure, until the geometric tails drop below `1e-15`.
    Auto,
    Explicit(i32, i32),
}

/// Midpoints per axis for the inner cylinder integral when it is not exact.
const INNER_POINTS: usize = 16;

/// Volume of the intersection of two radius-`r` balls at distance `dist`.
fn lens_volume(dim: usize, r: f64, dist: f64) -> f64 {
    if dist >= 2.0 * r {
        return 0.0;
    }
    let h = r - dist / 2.0;
    let x = ((2.0 * r * h - h * h) / (r * r)).clamp(0.0, 1.0);
    let cap = 0.5 * unit_ball_volume(dim) * r.powi(dim as i32) * beta_reg((dim as f64 + 1.0) / 2.0, 0.5, x);
    2.0 * cap
}

/// `∫_{y ∈ Q̃_r(z)} μ(Q̃_r(y))^{p'-1} dy`.
fn inner(mu: &DiscreteMeasure, z: &SpaceTimePoint, r: f64, pp: f64) -> f64 {
    let n = mu.dim;
    if mu.density.is_none() && pp == 2.0 {
        return mu
            .atoms
            .iter()
            .map(|a| {
                let dt = (z.t - a.t).abs();
                a.mass * lens_volume(n, r, spatial_distance(&z.x, &a.x)) * (r * r - dt).max(0.0)
            })
            .sum();
    }
    let k = INNER_POINTS;
    let total = k.pow(n as u32 + 1);
    let cell = (2.0 * r / k as f64).powi(n as i32) * (r * r / k as f64);
    let mut idx = vec![0usize; n + 1];
    let mut y = vec![0.0; n];
    let mut sum = 0.0;
    for _ in 0..total {
        for i in 0..n {
            y[i] = z.x[i] - r + 2.0 * r * (idx[i] as f64 + 0.5) / k as f64;
        }
        if spatial_distance(&y, &z.x) < r {
            let s = z.t - r * r / 2.0 + r * r * (idx[n] as f64 + 0.5) / k as f64;
            let m = mu.cylinder_measure(&centered(&y, s, r));
            if m > 0.0 {
                sum += m.powf(pp - 1.0);
            }
        }
        for i in 0..=n {
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
        }
    }
    sum * cell
}

/// `V(z) = Σ_n min{1, 2^{(n-n_R)δ}} 2^{n p'(N+2-α)} (χ_{Q̃_{2^{-n}}} * (χ_{Q̃_{2^{-n}}} * μ)^{p'-1})(z)`,
/// with `2^{-n_R} ≤ R < 2^{-n_R+1}`. With `δ = 0` and finite `R` the sum is
/// truncated to `2^{-n} ≤ R`, mirroring the truncated Wolff potential.
pub fn dyadic_wolff(mu: &DiscreteMeasure, spec: &PotentialSpec, z: &SpaceTimePoint, range: DyadicRange) -> Result<f64> {
    if z.dim() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: z.dim() });
    }
    spec.validate(mu.dim)?;
    mu.require_nonnegative()?;
    if mu.is_zero() {
        return Ok(0.0);
    }
    let pp = spec.p_prime();
    let expo = pp * (mu.dim as f64 + 2.0 - spec.alpha);
    let n_r = spec.r.map(|r| (-r.log2()).ceil() as i32);
    let term = |n: i32| -> f64 {
        let weight = match n_r {
            None => 1.0,
            Some(nr) if spec.delta > 0.0 => 2f64.powf(((n - nr) as f64 * spec.delta).min(0.0)),
            Some(nr) => {
                if n >= nr {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if weight == 0.0 {
            return 0.0;
        }
        let r = 2f64.powi(-n);
        weight * 2f64.powf(n as f64 * expo) * inner(mu, z, r, pp)
    };
    match range {
        DyadicRange::Explicit(lo, hi) => Ok((lo..=hi).map(term).sum()),
        DyadicRange::Auto => {
            let (near, far) = reach(mu, z);
            // smallest scale that can still see the measure
            let n_top = if near > 0.0 { (-(near / 2.0).log2()).floor() as i32 + 1 } else { i32::MAX };
            let n_start = (-(far.max(near)).log2()).floor() as i32;
            let mut sum = 0.0;
            let mut n = n_start.min(n_top);
            // large scales: geometric tail once the support is enclosed
            loop {
                let v = term(n);
                sum += v;
                let r = 2f64.powi(-n);
                if (r > 4.0 * far && v <= 1e-15 * sum) || n_start - n > 400 {
                    break;
                }
                n -= 1;
            }
            // small scales: stop when no atom is reachable or the density tail is negligible
            let mut n = n_start.min(n_top) + 1;
            let mut quiet = 0;
            while n <= n_top && n - n_start < 200 {
                let v = term(n);
                sum += v;
                quiet = if v <= 1e-15 * sum { quiet + 1 } else { 0 };
                if near == 0.0 && quiet >= 3 {
                    break;
                }
                n += 1;
            }
            Ok(sum)
        }
    }
}

/// Nearest and farthest parabolic distances from `z` to the support.
fn reach(mu: &DiscreteMeasure, z: &SpaceTimePoint) -> (f64, f64) {
    let mut near = f64::INFINITY;
    let mut far: f64 = 0.0;
    for a in mu.atoms.iter().filter(|a| a.mass != 0.0) {
        let d = parabolic_distance_raw(&z.x, z.t, &a.x, a.t);
        near = near.min(d);
        far = far.max(d);
    }
    if let Some(d) = &mu.density {
        if let Some((lo, hi, tlo, thi)) = d.support_box() {
            let (a, b) = super::riesz::box_extent(&z.x, z.t, &lo, &hi, tlo, thi);
            near = near.min(a);
            far = far.max(b);
        }
    }
    (near, far.max(near).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::potentials::wolff_potential;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn lens_volume_limits() {
        let r = 0.7;
        assert!((lens_volume(2, r, 0.0) - std::f64::consts::PI * r * r).abs() < 1e-12);
        assert!((lens_volume(1, r, 0.4) - (2.0 * r - 0.4)).abs() < 1e-12);
        assert_eq!(lens_volume(3, r, 1.5), 0.0);
        // two unit disks at distance 1: 2π/3 - √3/2
        let v = lens_volume(2, 1.0, 1.0);
        assert!((v - (2.0 * std::f64::consts::PI / 3.0 - 3f64.sqrt() / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_inner_matches_quadrature() {
        let mu = DiscreteMeasure::new(2, vec![Atom::new(vec![0.1, 0.0], 0.05, 1.0), Atom::new(vec![-0.2, 0.3], -0.1, 2.0)], None).unwrap();
        let z = pt(&[0.05, 0.1], 0.02);
        let exact = inner(&mu, &z, 0.4, 2.0);
        // same integral through the midpoint path (p' = 2 + 0 forces it with a tiny density)
        let mut with_density = mu.clone();
        let g = crate::grid::GridSpec::cube(2, 5.0, 1, 10.0, 11.0, 1).unwrap();
        with_density.density = Some(crate::measure::Density::new(g, vec![0.0]).unwrap());
        let quad = inner(&with_density, &z, 0.4, 2.0);
        assert!((exact - quad).abs() < 0.05 * exact, "{exact} vs {quad}");
    }

    #[test]
    fn dyadic_examples() {
        let spec = PotentialSpec::new(1.0).with_p(2.0);
        assert_eq!(dyadic_wolff(&DiscreteMeasure::zero(2), &spec, &SpaceTimePoint::origin(2), DyadicRange::Auto).unwrap(), 0.0);
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let z = pt(&[0.3, -0.2], 0.1);
        let auto = dyadic_wolff(&mu, &spec, &z, DyadicRange::Auto).unwrap();
        let wide = dyadic_wolff(&mu, &spec, &z, DyadicRange::Explicit(-80, 40)).unwrap();
        assert!((auto - wide).abs() < 1e-12 * wide, "{auto} vs {wide}");
        let w = wolff_potential(&mu, &spec, &z).unwrap();
        let ratio = auto / w;
        assert!(ratio > 0.01 && ratio < 100.0, "{ratio}");
    }
}
