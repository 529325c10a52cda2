//! Empirical constants of the pointwise estimates for heat solutions.

use super::{initial_slice, require_grid_dim, SampledSolution};
use crate::error::{invalid, Error, Result};
use crate::geometry::{parabolic_distance_raw, SpaceTimePoint};
use crate::grid::{GridFunction, GridSpec};
use crate::measure::{decompose_signed, DiscreteMeasure};
use crate::potentials::{discrete_lower_sum, potential_at_cells, riesz_potential, LatticePotential, PotentialSpec};
use crate::report::{Samples, VerificationReport};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rows of per-time maxima keyed by the exact time value.
fn per_time(points: &[SpaceTimePoint], values: impl Iterator<Item = f64>) -> BTreeMap<u64, (f64, f64)> {
    let mut out: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (p, v) in points.iter().zip(values) {
        let key = ordered_key(p.t);
        let e = out.entry(key).or_insert((p.t, 0.0));
        if v > e.1 || v.is_nan() {
            e.1 = v;
        }
    }
    out
}

fn ordered_key(t: f64) -> u64 {
    let b = t.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// `K̂ = max(u⁺ / I_2^R[μ⁺ + σ⁺⊗δ], u⁻ / I_2^R[μ⁻ + σ⁻⊗δ])` over the nodes,
/// skipping `0/0`. `r` is the truncation radius `2T_0`.
pub fn verify_two_sided_bounds(u: &SampledSolution, mu: &DiscreteMeasure, sigma: &DiscreteMeasure, r: f64) -> Result<VerificationReport> {
    if !(r > 0.0) {
        return invalid(format!("truncation radius {r} must be positive"));
    }
    let data = mu.plus(&initial_slice(sigma))?;
    if u.dim() != 0 && u.dim() != data.dim {
        return Err(Error::DimensionMismatch { expected: data.dim, found: u.dim() });
    }
    let (plus, minus) = decompose_signed(&data);
    let spec = if r.is_finite() { PotentialSpec::new(2.0).truncated(r) } else { PotentialSpec::new(2.0) };
    let mut k_plus = 0.0f64;
    let mut k_minus = 0.0f64;
    let mut ratios = Vec::with_capacity(u.values.len());
    for (z, &v) in u.points.iter().zip(&u.values) {
        let ratio = if v > 0.0 {
            let i = if plus.is_zero() { 0.0 } else { riesz_potential(&plus, &spec, z)? };
            let q = if i > 0.0 { v / i } else { f64::INFINITY };
            k_plus = k_plus.max(q);
            q
        } else if v < 0.0 {
            let i = if minus.is_zero() { 0.0 } else { riesz_potential(&minus, &spec, z)? };
            let q = if i > 0.0 { -v / i } else { f64::INFINITY };
            k_minus = k_minus.max(q);
            q
        } else {
            0.0
        };
        if !ratio.is_finite() {
            log::debug!("unbounded ratio at {z:?}: u = {v}, plus = {:?}, minus = {:?}", plus, minus);
        }
        ratios.push(ratio);
    }
    let mut report = VerificationReport::new("two_sided_bounds").param("R", crate::report::Num(r)).param("nodes", u.values.len());
    let mut samples = Samples::new(&["t", "max_ratio"]);
    for (_, (t, m)) in per_time(&u.points, ratios.iter().copied()) {
        samples.push(&[t, m]);
    }
    report.samples = samples;
    let k = k_plus.max(k_minus);
    report.set_constant("K", k);
    report.set_constant("K_plus", k_plus);
    report.set_constant("K_minus", k_minus);
    report.worst_ratio = k.into();
    let pass = k.is_finite();
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}

/// `Ĉ⁻¹ = max Σ_k μ(Q_{r_k/8}(y, s - 35r_k²/128)) / r_k^N / u(y,s)` over the
/// sampled points with a positive sum.
pub fn verify_lower_bound(u: &SampledSolution, mu: &DiscreteMeasure, r: f64) -> Result<VerificationReport> {
    mu.require_nonnegative()?;
    let mut report = VerificationReport::new("lower_bound").param("r", crate::report::Num(r)).param("points", u.values.len());
    let mut samples = Samples::new(&["t", "lower_sum", "u", "ratio"]);
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for (z, &v) in u.points.iter().zip(&u.values) {
        let s = discrete_lower_sum(mu, z, r)?;
        if s == 0.0 {
            continue;
        }
        used += 1;
        let ratio = if v > 0.0 { s / v } else { f64::INFINITY };
        worst = worst.max(ratio);
        samples.push(&[z.t, s, v, ratio]);
    }
    report.samples = samples;
    report.set_constant("C_inv", worst);
    report.set_constant("C", if worst > 0.0 { 1.0 / worst } else { f64::INFINITY });
    report.set_constant("points_used", used as f64);
    report.worst_ratio = worst.into();
    if used == 0 {
        return Ok(report.finish(true, "vacuous"));
    }
    let pass = worst.is_finite();
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}

/// Target rate for [`verify_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTarget {
    pub slope: f64,
    pub tol: f64,
    /// Accept any slope at or below `slope + tol`.
    #[serde(default)]
    pub one_sided: bool,
    /// Time window `[t_min, t_max]` used in the fit.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
}

impl DecayTarget {
    pub fn heat(dim: usize) -> Self {
        Self { slope: -(dim as f64) / 2.0, tol: 0.1, one_sided: false, window: None }
    }

    pub fn lane_emden(q: f64) -> Self {
        Self { slope: -1.0 / (q - 1.0), tol: 0.1, one_sided: true, window: None }
    }

    pub fn within(mut self, t_min: f64, t_max: f64) -> Self {
        self.window = Some((t_min, t_max));
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Least-squares fit of `log sup_x u(·,t)` against `log t`. With the mass of
/// the initial datum also reports `K̂ = max sup_x u · N (2t)^{N/2} / σ⁺`.
pub fn verify_decay(u: &SampledSolution, target: DecayTarget, sigma_mass: Option<f64>) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("decay").param("target", target);
    let sups = per_time(&u.points, u.values.iter().copied());
    let mut rows = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k_hat = 0.0f64;
    let n = u.dim() as f64;
    for (_, (t, s)) in sups {
        rows.push((t, s));
        if let Some((a, b)) = target.window {
            if t < a || t > b {
                continue;
            }
        }
        if t > 0.0 && s > 0.0 {
            xs.push(t.ln());
            ys.push(s.ln());
            if let Some(m) = sigma_mass {
                k_hat = k_hat.max(s * n * (2.0 * t).powf(n / 2.0) / m);
            }
        }
    }
    let mut samples = Samples::new(&["t", "sup_u", "fitted"]);
    if u.values.iter().all(|v| *v == 0.0) {
        for (t, s) in rows {
            samples.push(&[t, s, f64::NAN]);
        }
        report.samples = samples;
        return Ok(report.finish(false, "no decay data"));
    }
    if xs.len() < 5 {
        return invalid(format!("only {} usable times for the decay fit; need 5", xs.len()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let prefactor = (my - slope * mx).exp();
    for (t, s) in rows {
        samples.push(&[t, s, prefactor * t.powf(slope)]);
    }
    report.samples = samples;
    report.set_constant("slope", slope);
    report.set_constant("prefactor", prefactor);
    if sigma_mass.is_some() {
        report.set_constant("K", k_hat);
    }
    let miss = slope - target.slope;
    report.worst_ratio = miss.abs().into();
    let pass = if target.one_sided { miss <= target.tol } else { miss.abs() <= target.tol };
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}

/// `Ĉ₂ = max |∇u| / I_1[|μ|]` with central differences at interior nodes,
/// excluding nodes within parabolic distance `h` of an atom.
pub fn gradient_bound_check(u: &GridFunction, mu: &DiscreteMeasure) -> Result<VerificationReport> {
    require_grid_dim(u, mu)?;
    let gr = gradient_ratios(u, mu, None)?;
    let h = (0..u.grid.dim()).map(|i| u.grid.h(i)).fold(0.0, f64::max);
    let mut ratios = vec![0.0; u.grid.len()];
    for (&c, (g, i)) in gr.cells.iter().zip(gr.grad.iter().zip(&gr.potential)) {
        ratios[c] = ratio(*g, *i);
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let mut report = VerificationReport::new("gradient_bound").param("exclusion_radius", h).param("excluded_nodes", gr.excluded);
    let mut samples = Samples::new(&["t", "max_ratio"]);
    for (_, (t, v)) in per_time(&u.grid.centers(), ratios.iter().copied()) {
        samples.push(&[t, v]);
    }
    report.samples = samples;
    report.set_constant("C_2", worst);
    report.worst_ratio = worst.into();
    let pass = worst.is_finite();
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}

pub(crate) fn ratio(g: f64, i: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else if i > 0.0 {
        g / i
    } else {
        f64::INFINITY
    }
}

/// Gradient magnitudes and `I_1[|μ|]` on the interior nodes farther than `h`
/// from every atom.
pub(crate) struct GradientRatios {
    pub cells: Vec<usize>,
    pub grad: Vec<f64>,
    pub potential: Vec<f64>,
    pub excluded: usize,
}

pub(crate) fn gradient_ratios(u: &GridFunction, mu: &DiscreteMeasure, cache: Option<&mut Vec<LatticePotential>>) -> Result<GradientRatios> {
    let g = &u.grid;
    let abs = mu.abs();
    let h = (0..g.dim()).map(|i| g.h(i)).fold(0.0, f64::max);
    let grads = spatial_gradient(u);
    let mut cells = Vec::new();
    let mut grad = Vec::new();
    let mut excluded = 0usize;
    for (f, gm) in grads.into_iter().enumerate() {
        let Some(gm) = gm else { continue };
        let z = g.center(f);
        if abs.atoms.iter().any(|a| a.mass != 0.0 && parabolic_distance_raw(&z.x, z.t, &a.x, a.t) < h) {
            excluded += 1;
            continue;
        }
        cells.push(f);
        grad.push(gm);
    }
    let mut local = Vec::new();
    let cache = cache.unwrap_or(&mut local);
    let potential = if abs.is_zero() { vec![0.0; cells.len()] } else { potential_at_cells(&abs, &PotentialSpec::new(1.0), g, &cells, cache)? };
    Ok(GradientRatios { cells, grad, potential, excluded })
}

/// The grid with half the spatial step and a quarter of the time step, which
/// keeps the explicit stability ratio.
pub fn refined(grid: &GridSpec) -> Result<GridSpec> {
    GridSpec::new(
        grid.corner.clone(),
        grid.sides.clone(),
        grid.t0,
        grid.t1,
        grid.cells.iter().map(|c| 2 * c).collect(),
        4 * grid.steps,
    )
}

/// Stability of the fitted constant `key` between a run and its refinement:
/// pass when both runs pass and the values differ by less than `max_change`×.
pub fn refinement_report(coarse: &VerificationReport, fine: &VerificationReport, key: &str, max_change: f64) -> VerificationReport {
    let a = coarse.constant(key).unwrap_or(f64::NAN);
    let b = fine.constant(key).unwrap_or(f64::NAN);
    let change = if a == 0.0 && b == 0.0 { 1.0 } else { (a / b).max(b / a) };
    let mut report = VerificationReport::new(&format!("{}_refinement", coarse.check)).param("constant", key).param("max_change", max_change);
    report.set_constant(&format!("{key}_coarse"), a);
    report.set_constant(&format!("{key}_fine"), b);
    report.set_constant("change", change);
    report.samples = fine.samples.clone();
    report.worst_ratio = change.into();
    let pass = coarse.pass && fine.pass && change.is_finite() && change < max_change;
    report.finish(pass, if pass { "pass" } else { "fail" })
}

/// Restriction of a solution on `refined(coarse)` to the nodes of `coarse`:
/// the mean over the `2^N` spatial children and the two time levels whose
/// centers straddle the coarse center.
pub fn restrict(fine: &GridFunction, coarse: &GridSpec) -> Result<GridFunction> {
    if fine.grid != refined(coarse)? {
        return invalid("restriction needs the refinement of the coarse grid");
    }
    let n = coarse.dim();
    let fg = &fine.grid;
    let m = fg.spatial_len();
    let mut values = Vec::with_capacity(coarse.len());
    for k in 0..coarse.steps {
        for s in 0..coarse.spatial_len() {
            let idx = coarse.spatial_index(s);
            let mut sum = 0.0;
            for child in 0..1usize << n {
                let fi: Vec<usize> = idx.iter().enumerate().map(|(a, &i)| 2 * i + ((child >> a) & 1)).collect();
                let fs = fg.spatial_linear(&fi);
                sum += fine.values[(4 * k + 1) * m + fs] + fine.values[(4 * k + 2) * m + fs];
            }
            values.push(sum / (2 * (1 << n)) as f64);
        }
    }
    GridFunction::new(coarse.clone(), values)
}

/// Refinement stability of `Ĉ⁻¹` compared on the coarse nodes, so that the
/// change reflects the solution and not the denser sampling of the finer
/// lattice. The all-node value of the fine run is kept for reference.
pub fn lower_bound_refinement(coarse: &GridFunction, fine: &GridFunction, mu: &DiscreteMeasure, r: f64, max_change: f64) -> Result<VerificationReport> {
    let a = verify_lower_bound(&SampledSolution::from_grid(coarse), mu, r)?;
    let b = verify_lower_bound(&SampledSolution::from_grid(&restrict(fine, &coarse.grid)?), mu, r)?;
    let all = verify_lower_bound(&SampledSolution::from_grid(fine), mu, r)?;
    let mut report = refinement_report(&a, &b, "C_inv", max_change);
    report.set_constant("C_inv_fine_all_nodes", all.constant("C_inv").unwrap_or(f64::NAN));
    Ok(report)
}

/// Central-difference `|∇u|` at nodes whose neighbors all exist.
pub(crate) fn spatial_gradient(u: &GridFunction) -> Vec<Option<f64>> {
    let g = &u.grid;
    let n = g.dim();
    let m = g.spatial_len();
    let mut stride = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * g.cells[i + 1];
    }
    (0..g.len())
        .map(|f| {
            let s = f % m;
            let mut sq = 0.0;
            for a in 0..n {
                let j = (s / stride[a]) % g.cells[a];
                if j == 0 || j + 1 == g.cells[a] {
                    return None;
                }
                let d = (u.values[f + stride[a]] - u.values[f - stride[a]]) / (2.0 * g.h(a));
                sq += d * d;
            }
            Some(sq.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{solve_free_space, Domain, HeatProblem, Scheme};
    use super::*;
    use crate::grid::GridSpec;
    use crate::measure::Atom;
    use std::f64::consts::PI;

    fn free(mu: DiscreteMeasure, sigma: DiscreteMeasure, g: GridSpec) -> GridFunction {
        solve_free_space(&HeatProblem::new(mu, sigma, Domain::FreeSpace, g, Scheme::Explicit).unwrap()).unwrap()
    }

    #[test]
    fn dirac_two_sided_ratio_matches_closed_form() {
        // u / I_2[δ] = N H_2(x,t) d^N with R = ∞
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let g = GridSpec::cube(2, 1.0, 6, 0.0, 1.0, 5).unwrap();
        let u = free(mu.clone(), DiscreteMeasure::zero(2), g.clone());
        let rep = verify_two_sided_bounds(&SampledSolution::from_grid(&u), &mu, &DiscreteMeasure::zero(2), f64::INFINITY).unwrap();
        let expected = g
            .centers()
            .iter()
            .map(|z| {
                let x2: f64 = z.x.iter().map(|v| v * v).sum();
                let d = x2.sqrt().max((2.0 * z.t).sqrt());
                2.0 * (-x2 / (4.0 * z.t)).exp() / (4.0 * PI * z.t) * d * d
            })
            .fold(0.0, f64::max);
        let k = rep.constant("K").unwrap();
        assert!((k / expected - 1.0).abs() < 1e-9, "{k} {expected}");
        assert!(rep.pass);
    }

    #[test]
    fn zero_solution_gives_zero_constant() {
        let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 2).unwrap();
        let u = SampledSolution::from_grid(&GridFunction::zeros(g));
        let rep = verify_two_sided_bounds(&u, &DiscreteMeasure::zero(1), &DiscreteMeasure::zero(1), 10.0).unwrap();
        assert_eq!(rep.constant("K"), Some(0.0));
    }

    #[test]
    fn signed_atoms_have_finite_one_sided_ratios() {
        let mu = DiscreteMeasure::new(2, vec![Atom::new(vec![0.3, 0.0], 0.0, 1.0), Atom::new(vec![-0.3, 0.1], 0.1, -2.0)], None).unwrap();
        let g = GridSpec::cube(2, 1.0, 8, 0.0, 0.5, 6).unwrap();
        let u = free(mu.clone(), DiscreteMeasure::zero(2), g);
        let rep = verify_two_sided_bounds(&SampledSolution::from_grid(&u), &mu, &DiscreteMeasure::zero(2), 10.0).unwrap();
        let (kp, km) = (rep.constant("K_plus").unwrap(), rep.constant("K_minus").unwrap());
        assert!(kp > 0.0 && kp.is_finite() && km > 0.0 && km.is_finite(), "{kp} {km}");
    }

    #[test]
    fn lower_bound_at_the_reference_point() {
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let z = SpaceTimePoint::new(vec![0.0, 0.0], 35.0 / 128.0);
        let h2 = 1.0 / (4.0 * PI * z.t);
        let u = SampledSolution::new(vec![z.clone(), SpaceTimePoint::new(vec![0.0, 0.0], -1.0)], vec![h2, 0.0]).unwrap();
        let rep = verify_lower_bound(&u, &mu, 1.0).unwrap();
        let sum = discrete_lower_sum(&mu, &z, 1.0).unwrap();
        assert!((rep.constant("C_inv").unwrap() - sum / h2).abs() < 1e-12);
        // the point in the atom's past has an empty sum and is skipped
        assert_eq!(rep.constant("points_used"), Some(1.0));
    }

    #[test]
    fn gaussian_decay_rate() {
        let sigma = DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0);
        let g = GridSpec::cube(2, 1.0, 5, 0.0, 4.0, 16).unwrap();
        let u = free(DiscreteMeasure::zero(2), sigma, g);
        let rep = verify_decay(&SampledSolution::from_grid(&u), DecayTarget::heat(2).with_tol(0.02), Some(1.0)).unwrap();
        assert!((rep.constant("slope").unwrap() + 1.0).abs() < 1e-10);
        assert!((rep.constant("prefactor").unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-10);
        assert!(rep.pass);
        let zero = SampledSolution::from_grid(&GridFunction::zeros(GridSpec::cube(1, 1.0, 3, 0.0, 1.0, 8).unwrap()));
        let rep = verify_decay(&zero, DecayTarget::heat(1), None).unwrap();
        assert_eq!(rep.status, "no decay data");
    }

    #[test]
    fn gradient_of_a_dirac_is_controlled() {
        let mu = DiscreteMeasure::dirac(&SpaceTimePoint::origin(1), 1.0);
        let g = GridSpec::cube(1, 1.0, 41, -0.2, 0.6, 8).unwrap();
        let u = free(mu.clone(), DiscreteMeasure::zero(1), g.clone());
        let rep = gradient_bound_check(&u, &mu).unwrap();
        let c = rep.constant("C_2").unwrap();
        assert!(c > 0.0 && c.is_finite());
        let flat = GridFunction::new(g, vec![2.0; 41 * 8]).unwrap();
        assert_eq!(gradient_bound_check(&flat, &mu).unwrap().constant("C_2"), Some(0.0));
    }

    #[test]
    fn restriction_reproduces_affine_functions() {
        let coarse = GridSpec::cube(2, 1.0, 3, 0.0, 1.0, 2).unwrap();
        let f = |z: &SpaceTimePoint| 1.0 + 2.0 * z.x[0] - z.x[1] + 3.0 * z.t;
        let fine = GridFunction::from_fn(refined(&coarse).unwrap(), f);
        let r = restrict(&fine, &coarse).unwrap();
        for (z, v) in coarse.centers().iter().zip(&r.values) {
            assert!((v - f(z)).abs() < 1e-12);
        }
        assert!(restrict(&fine, &refined(&coarse).unwrap()).is_err());
    }
}
