//! Time-slice `L^q` bounds of `I_1[μ](x, ·)` by elliptic potentials.

use super::elliptic::elliptic_riesz_potential;
use super::{riesz_potential, PotentialSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{spatial_distance, SpaceTimePoint};
use crate::grid::GridSpec;
use crate::measure::{Density, DiscreteMeasure};
use crate::report::VerificationReport;
use quadrature::double_exponential;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSliceBranch {
    /// `‖I_1[μ](x,·)‖_{L^q} ≤ I_{2/q-1}[μ_1](x)`, `1 < q < 2`.
    Projection,
    /// `‖I_1[μ](x,·)‖_{L^q} ≤ I_{2/q+1-2/q_1}[μ_2](x)`, `dμ_2 = ‖μ(x,·)‖_{L^{q_1}} dx`.
    TimeNorm { q1: f64 },
}

/// `(∫_ℝ I_1[μ](x,t)^q dt)^{1/q}`.
fn time_norm(mu: &DiscreteMeasure, x: &[f64], q: f64) -> Result<f64> {
    let spec = PotentialSpec::new(1.0);
    let mut cuts = Vec::new();
    for a in &mu.atoms {
        let h = spatial_distance(x, &a.x).powi(2) / 2.0;
        cuts.extend([a.t - h, a.t, a.t + h]);
    }
    if let Some(d) = &mu.density {
        if let Some((lo, hi, tlo, thi)) = d.support_box() {
            let far: f64 = (0..x.len()).map(|i| (x[i] - lo[i]).abs().max((x[i] - hi[i]).abs()).powi(2)).sum();
            cuts.extend([tlo - far / 2.0, tlo, thi, thi + far / 2.0]);
            let tau = if d.slab { 0.0 } else { d.grid.tau() };
            if tau > 0.0 {
                let (a, b) = (tlo.max(d.grid.t0), thi.min(d.grid.t1));
                let k = ((b - a) / tau).round() as usize;
                cuts.extend((0..=k).map(|i| a + i as f64 * tau));
            }
        }
    }
    if cuts.is_empty() {
        return Ok(0.0);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let err = std::cell::Cell::new(None);
    let f = |t: f64| -> f64 {
        match riesz_potential(mu, &spec, &SpaceTimePoint::new(x.to_vec(), t)) {
            Ok(v) => v.powf(q),
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    let span = (cuts[cuts.len() - 1] - cuts[0]).max(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += double_exponential::integrate(&f, w[0], w[1], 1e-12).integral;
    }
    // tails: t = edge ± span·u/(1-u)
    let (first, last) = (cuts[0], cuts[cuts.len() - 1]);
    let tail = |edge: f64, sign: f64| {
        double_exponential::integrate(
            |u: f64| {
                if u >= 1.0 {
                    return 0.0;
                }
                let t = edge + sign * span * u / (1.0 - u);
                f(t) * span / ((1.0 - u) * (1.0 - u))
            },
            0.0,
            1.0,
            1e-12,
        )
        .integral
    };
    total += tail(last, 1.0) + tail(first, -1.0);
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(total.powf(1.0 / q))
}

/// Spatial density `‖μ(x,·)‖_{L^{q_1}(ℝ)}` of a space-time density.
fn time_norm_density(d: &Density, q1: f64) -> Result<DiscreteMeasure> {
    let g = &d.grid;
    let m = g.spatial_len();
    let tau = g.tau();
    let values = (0..m)
        .map(|s| ((0..g.steps).map(|k| d.values[k * m + s].abs().powf(q1)).sum::<f64>() * tau).powf(1.0 / q1))
        .collect();
    let spatial = GridSpec::new(g.corner.clone(), g.sides.clone(), 0.0, 1.0, g.cells.clone(), 1)?;
    DiscreteMeasure::from_density(Density::slab(spatial, values)?)
}

/// Checks the time-slice inequality at `x` and reports both sides.
pub fn time_slice_bound_check(mu: &DiscreteMeasure, q: f64, x: &[f64], branch: TimeSliceBranch) -> Result<VerificationReport> {
    if x.len() != mu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, found: x.len() });
    }
    mu.require_nonnegative()?;
    let n = mu.dim as f64;
    let (rhs, order) = match branch {
        TimeSliceBranch::Projection => {
            if !(q > 1.0 && q < 2.0) {
                return invalid(format!("q = {q} must lie in (1, 2)"));
            }
            let beta = 2.0 / q - 1.0;
            if beta >= n {
                return invalid("order 2/q - 1 must be below N");
            }
            (elliptic_riesz_potential(mu, beta, x)?, beta)
        }
        TimeSliceBranch::TimeNorm { q1 } => {
            if !(q > 1.0 && q1 > 2.0 * q / (q + 2.0) && q1 <= q) {
                return invalid(format!("need q > 1 and 2q/(q+2) < q1 = {q1} <= q"));
            }
            let beta = 2.0 / q + 1.0 - 2.0 / q1;
            if beta >= n {
                return invalid("order 2/q + 1 - 2/q1 must be below N");
            }
            if mu.atoms.iter().any(|a| a.mass > 0.0) {
                // atoms have infinite L^{q1} norm in time
                (f64::INFINITY, beta)
            } else {
                match &mu.density {
                    None => (0.0, beta),
                    Some(d) if d.slab => (f64::INFINITY, beta),
                    Some(d) => (elliptic_riesz_potential(&time_norm_density(d, q1)?, beta, x)?, beta),
                }
            }
        }
    };
    let lhs = time_norm(mu, x, q)?;
    let tol = 1e-6;
    let pass = lhs <= rhs * (1.0 + tol) || (lhs == 0.0 && rhs == 0.0);
    let mut r = VerificationReport::new("time-slice")
        .param("q", q)
        .param("x", x)
        .param("branch", branch)
        .param("elliptic_order", order);
    r.set_constant("lhs", lhs);
    r.set_constant("rhs", rhs);
    r.worst_ratio = if rhs > 0.0 { (lhs / rhs).into() } else { 0.0.into() };
    Ok(r.finish(pass, if pass { "pass" } else { "fail" }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::radial::pow_int;

    #[test]
    fn dirac_hand_check() {
        // I_1[δ](x,t) = d^{-3}/3 with d = max(1, sqrt(2|t|)) at |x| = 1, N = 2:
        // ∫ = 2 [ (1/3)^q + ∫_{1/2}^∞ (2t)^{-3q/2} 3^{-q} dt ]
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let q = 1.5;
        let r = time_slice_bound_check(&mu, q, &[1.0, 0.0], TimeSliceBranch::Projection).unwrap();
        let inner = 0.5 * (3f64).powf(-q) + 3f64.powf(-q) * 0.5 * pow_int(1.0 - 1.5 * q, 1.0, f64::INFINITY);
        let oracle = (2.0 * inner).powf(1.0 / q);
        let lhs = r.constant("lhs").unwrap();
        assert!((lhs - oracle).abs() < 1e-8 * oracle, "{lhs} vs {oracle}");
        assert!((r.constant("rhs").unwrap() - 1.0 / (2.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn zero_measure_passes() {
        let r = time_slice_bound_check(&DiscreteMeasure::zero(2), 1.5, &[0.3, 0.0], TimeSliceBranch::Projection).unwrap();
        assert_eq!(r.constant("lhs"), Some(0.0));
        assert_eq!(r.constant("rhs"), Some(0.0));
        assert!(r.pass);
        assert!(time_slice_bound_check(&DiscreteMeasure::zero(2), 2.5, &[0.3, 0.0], TimeSliceBranch::Projection).is_err());
    }

    #[test]
    fn density_time_norm_branch() {
        let g = GridSpec::cube(2, 0.5, 2, 0.0, 0.5, 2).unwrap();
        let mu = DiscreteMeasure::from_density(Density::new(g, vec![1.0, 2.0, 0.5, 1.0, 1.5, 1.0, 0.0, 2.0]).unwrap()).unwrap();
        let r = time_slice_bound_check(&mu, 1.5, &[1.0, 0.2], TimeSliceBranch::TimeNorm { q1: 1.2 }).unwrap();
        assert!(r.pass, "{:?}", r.fitted_constants);
        let p = time_slice_bound_check(&mu, 1.5, &[1.0, 0.2], TimeSliceBranch::Projection).unwrap();
        assert!(p.pass, "{:?}", p.fitted_constants);
    }
}
