//! Empirical checks of the good-λ inequality, the Wolff–maximal norm
//! equivalence, exponential integrability and the weak-type mapping bounds.

use super::lorentz::lorentz_sorted;
use super::{lorentz_morrey_norm, lorentz_norm, NormSpec, Weight};
use crate::error::{invalid, Result};
use crate::geometry::ParabolicCylinder;
use crate::grid::{GridFunction, GridSpec};
use crate::measure::DiscreteMeasure;
use crate::potentials::{maximal_potential, wolff_potential, PotentialSpec};
use crate::report::{Num, Samples, VerificationReport};
use serde::{Deserialize, Serialize};

/// `W_{α,p}^R[μ]` and `(M_{αp}^R[μ])^{1/(p-1)}` at every cell center.
pub fn potentials_on_grid(mu: &DiscreteMeasure, spec: &PotentialSpec, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let mspec = PotentialSpec { alpha: spec.alpha * spec.p, delta: 0.0, ..spec.clone() };
    let gamma = 1.0 / (spec.p - 1.0);
    let mut w = Vec::with_capacity(grid.len());
    let mut m = Vec::with_capacity(grid.len());
    for z in grid.centers() {
        w.push(wolff_potential(mu, spec, &z)?);
        m.push(maximal_potential(mu, &mspec, &z)?.powf(gamma));
    }
    Ok((w, m))
}

fn good_lambda_a(dim: usize, spec: &PotentialSpec) -> f64 {
    2.0 + 3f64.powf((dim as f64 + 2.0 - spec.alpha * spec.p) / (spec.p - 1.0))
}

/// ε and λ values of a good-λ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodLambdaGrid {
    pub eps: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl GoodLambdaGrid {
    /// `count_eps` geometric ε in `[1/8, 64]` and `count_lambda` geometric λ
    /// between `min W / a` and `max W / a` over the positive Wolff values.
    pub fn automatic(wolff: &[f64], a: f64, count_eps: usize, count_lambda: usize) -> Self {
        let geo = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            if n <= 1 || hi <= lo {
                return vec![lo];
            }
            (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
        };
        let mut pos: Vec<f64> = wolff.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lambda = if pos.is_empty() {
            vec![1.0]
        } else {
            let lo = pos[0] / a;
            let hi = pos[pos.len() - 1] / a;
            geo(lo, hi, count_lambda)
        };
        Self { eps: geo(0.125, 64.0, count_eps), lambda }
    }
}

/// Sweeps `(ε, λ)` and fits `w{W > aλ, M^{1/(p-1)} ≤ ελ} ≤ C_1 e^{-C_2/ε} w{W > λ}`.
///
/// `C_2` comes from least squares of `log(LHS/w{W>λ})` against `1/ε` over the
/// pairs with a nonempty left set; `C_1` is then the smallest value making the
/// fitted inequality hold on every pair. Pass requires `C_2 > 0` (or an empty
/// left side everywhere).
pub fn good_lambda_check(
    mu: &DiscreteMeasure,
    spec: &PotentialSpec,
    sweep: Option<&GoodLambdaGrid>,
    w: &Weight,
) -> Result<VerificationReport> {
    w.validate()?;
    let grid = w.grid();
    let a = good_lambda_a(mu.dim, spec);
    let (wolff, maxr) = potentials_on_grid(mu, spec, grid)?;
    let auto;
    let sweep = match sweep {
        Some(s) => s,
        None => {
            auto = GoodLambdaGrid::automatic(&wolff, a, 10, 12);
            &auto
        }
    };
    let mass: Vec<f64> = (0..grid.len()).map(|j| w.cell_mass(j)).collect();
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for &eps in &sweep.eps {
        for &lam in &sweep.lambda {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for j in 0..grid.len() {
                if wolff[j] > lam {
                    rhs += mass[j];
                    if wolff[j] > a * lam && maxr[j] <= eps * lam {
                        lhs += mass[j];
                    }
                }
            }
            if rhs == 0.0 {
                skipped += 1;
                continue;
            }
            pairs.push((eps, lam, lhs, rhs));
        }
    }
    let positive: Vec<(f64, f64)> =
        pairs.iter().filter(|p| p.2 > 0.0).map(|p| (1.0 / p.0, (p.2 / p.3).ln())).collect();
    let mut distinct: Vec<f64> = positive.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let (c2, fit) = if positive.is_empty() {
        (f64::INFINITY, "vacuous")
    } else if distinct.len() == 1 {
        // one ε only: the best exponent with C_1 = 1 (the ratio never exceeds 1)
        let c2 = positive.iter().map(|(ie, l)| -l / ie).fold(f64::INFINITY, f64::min);
        (c2, "envelope")
    } else {
        let n = positive.len() as f64;
        let mx = positive.iter().map(|p| p.0).sum::<f64>() / n;
        let my = positive.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = positive.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = positive.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (-sxy / sxx, "least squares")
    };
    let c1 = if positive.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.2 / p.3 * (c2 / p.0).exp()).fold(0.0, f64::max)
    };
    let mut samples = Samples::new(&["lambda", "eps", "lhs", "rhs"]);
    let mut worst: f64 = 0.0;
    for &(eps, lam, lhs, rhs) in &pairs {
        let bound = if positive.is_empty() { 0.0 } else { c1 * (-c2 / eps).exp() * rhs };
        samples.push(&[lam, eps, lhs, bound]);
        if lhs > 0.0 {
            worst = worst.max(lhs / bound);
        }
    }
    let holds = pairs.iter().all(|&(eps, _, lhs, rhs)| {
        lhs == 0.0 || lhs <= c1 * (-c2 / eps).exp() * rhs * (1.0 + 1e-12)
    });
    let pass = holds && c2 > 0.0;
    let mut r = VerificationReport::new("good-lambda")
        .param("alpha", spec.alpha)
        .param("p", spec.p)
        .param("R", spec.r)
        .param("a", a)
        .param("eps", &sweep.eps)
        .param("lambda", &sweep.lambda)
        .param("fit", fit);
    r.set_constant("C_1", c1);
    r.set_constant("C_2", c2);
    r.set_constant("nonempty_pairs", positive.len() as f64);
    r.worst_ratio = Num(worst);
    r.samples = samples;
    if skipped > 0 {
        r.note(format!("{skipped} pairs skipped with empty level set {{W > lambda}}"));
    }
    let largest_eps_empty = sweep.eps.iter().copied().filter(|e| pairs.iter().all(|p| p.0 != *e || p.2 == 0.0)).fold(0.0, f64::max);
    r.set_constant("largest_eps_with_empty_lhs", largest_eps_empty);
    let status = if positive.is_empty() { "vacuous" } else if pass { "pass" } else { "fail" };
    Ok(r.finish(pass, status))
}

/// Compares `‖W_{α,p}^R[μ]‖_{L^{q,s}(dw)}` with `‖(M_{αp}^R[μ])^{1/(p-1)}‖_{L^{q,s}(dw)}`.
/// Pass when the ratio lies in `[1/acceptance, acceptance]`.
pub fn norm_equivalence_report(
    mu: &DiscreteMeasure,
    spec: &PotentialSpec,
    q: f64,
    s: f64,
    w: &Weight,
    acceptance: f64,
) -> Result<VerificationReport> {
    if q <= spec.p - 1.0 {
        return invalid(format!("q = {q} must exceed p - 1 = {}", spec.p - 1.0));
    }
    w.validate()?;
    let (wolff, maxr) = potentials_on_grid(mu, spec, w.grid())?;
    let ns = NormSpec::lorentz(q, s).with_weight(w.clone());
    let nw = lorentz_norm(&GridFunction::new(w.grid().clone(), wolff)?, &ns)?;
    let nm = lorentz_norm(&GridFunction::new(w.grid().clone(), maxr)?, &ns)?;
    let ratio = if nm > 0.0 { nw / nm } else if nw == 0.0 { 1.0 } else { f64::INFINITY };
    let pass = ratio.is_finite() && ratio <= acceptance && ratio >= 1.0 / acceptance;
    let mut r = VerificationReport::new("norm-equivalence")
        .param("alpha", spec.alpha)
        .param("p", spec.p)
        .param("R", spec.r)
        .param("q", q)
        .param("s", Num(s))
        .param("acceptance", acceptance);
    r.set_constant("wolff_norm", nw);
    r.set_constant("maximal_norm", nm);
    r.set_constant("ratio", ratio);
    r.worst_ratio = Num(ratio.max(1.0 / ratio));
    Ok(r.finish(pass, if pass { "pass" } else { "fail" }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegrabilityOptions {
    /// Cells per axis (space and time) of the grid over `Q̃_{2ρ}`.
    pub cells: usize,
    /// Largest `C_1` tried; the sweep halves it down to `c1_max / 2^20`.
    pub c1_max: f64,
    /// Relative agreement between the full and the half sample.
    pub stability: f64,
}

impl Default for ExpIntegrabilityOptions {
    fn default() -> Self {
        Self { cells: 12, c1_max: 8.0, stability: 0.1 }
    }
}

/// Exponential integrability of `W_{α,p}^R[μ_{Q̃_ρ}]` over `Q̃_{2ρ}` under the
/// normalization `sup_{Q̃_ρ} M_{αp}^R[μ_{Q̃_ρ}] ≤ 1` (checked at cell centers).
pub fn exp_integrability_check(
    mu: &DiscreteMeasure,
    spec: &PotentialSpec,
    cyl: &ParabolicCylinder,
    opts: &ExpIntegrabilityOptions,
) -> Result<VerificationReport> {
    let rho = cyl.radius;
    let n = mu.dim;
    let big = ParabolicCylinder::centered(cyl.center.clone(), 2.0 * rho)?;
    let small = ParabolicCylinder::centered(cyl.center.clone(), rho)?;
    let local = mu.restrict(&small);
    let (tlo, thi) = big.time_interval();
    let corner: Vec<f64> = cyl.center.x.iter().map(|c| c - 2.0 * rho).collect();
    let grid = GridSpec::new(corner, vec![4.0 * rho; n], tlo, thi, vec![opts.cells; n], opts.cells)?;
    let mspec = PotentialSpec { alpha: spec.alpha * spec.p, delta: 0.0, ..spec.clone() };
    let mut sup_m: f64 = 0.0;
    let mut wolff = Vec::new();
    for z in grid.centers() {
        if !big.contains(&z) {
            continue;
        }
        if small.contains(&z) {
            sup_m = sup_m.max(maximal_potential(&local, &mspec, &z)?);
        }
        wolff.push(wolff_potential(&local, spec, &z)?);
    }
    let mut r = VerificationReport::new("exp-integrability")
        .param("alpha", spec.alpha)
        .param("p", spec.p)
        .param("R", spec.r)
        .param("rho", rho)
        .param("center", &cyl.center)
        .param("cells", opts.cells);
    r.set_constant("sup_maximal", sup_m);
    if sup_m > 1.0 * (1.0 + 1e-12) {
        r.note("normalization sup M <= 1 fails on the sampled cells");
        return Ok(r.finish(false, "hypothesis violated"));
    }
    let avg = |c1: f64, stride: usize| -> f64 {
        let vals: Vec<f64> = wolff.iter().step_by(stride).map(|v| (c1 * v).exp()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let mut samples = Samples::new(&["c1", "average", "half_sample"]);
    let mut found = None;
    let mut c1 = opts.c1_max;
    for _ in 0..=20 {
        let full = avg(c1, 1);
        let half = avg(c1, 2);
        samples.push(&[c1, full, half]);
        if found.is_none() && full.is_finite() && ((full - half) / full).abs() <= opts.stability {
            found = Some((c1, full));
        }
        c1 /= 2.0;
    }
    r.samples = samples;
    let pass = found.is_some();
    if let Some((c1, c2)) = found {
        r.set_constant("C_1", c1);
        r.set_constant("C_2", c2);
        r.worst_ratio = Num(c2);
    }
    Ok(r.finish(pass, if pass { "pass" } else { "fail" }))
}

/// Which weak-type bound a [`weak_mapping_check`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeakMapVariant {
    /// `‖W_{α,p}[μ]‖_{L^{(N+2)(p-1)/(N+2-αp),∞}} ≤ C μ(ℝ^{N+1})^{1/(p-1)}`, or,
    /// when `αp = N+2`, the level-set bound with exponent `(αp+ε(p-1))/ε`.
    #[default]
    Total,
    /// `‖W_{α,p}[μ]^{p-1}‖_{L^{θq/(θ-αpq);θ}} ≤ C ‖μ‖_{L^{q;θ}}` for densities.
    Morrey { q: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMapOptions {
    /// Cells per axis of the evaluation grid.
    pub cells: usize,
    /// Half-width of the evaluation box in units of the support size.
    pub margin: f64,
    /// `ε` of the `αp = N+2` level-set bound.
    pub eps: f64,
    pub variant: WeakMapVariant,
}

impl Default for WeakMapOptions {
    fn default() -> Self {
        Self { cells: 24, margin: 2.0, eps: 0.1, variant: WeakMapVariant::Total }
    }
}

/// Box of half-width `margin·max(support size, 1)` around the support center.
fn evaluation_grid(mu: &DiscreteMeasure, cells: usize, margin: f64) -> Result<GridSpec> {
    let n = mu.dim;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let (mut tlo, mut thi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut extend = |x: &[f64], a: f64, b: f64| {
        for i in 0..n {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
        tlo = tlo.min(a);
        thi = thi.max(b);
    };
    for a in &mu.atoms {
        extend(&a.x, a.t, a.t);
    }
    if let Some(d) = &mu.density {
        if let Some((l, h, ta, tb)) = d.support_box() {
            extend(&l, ta, tb);
            extend(&h, ta, tb);
        }
    }
    if !tlo.is_finite() {
        return GridSpec::cube(n, margin, cells, -margin * margin / 2.0, margin * margin / 2.0, cells);
    }
    let size = (0..n).map(|i| hi[i] - lo[i]).fold((2.0 * (thi - tlo)).sqrt(), f64::max).max(1.0);
    let half = margin * size;
    let corner: Vec<f64> = (0..n).map(|i| 0.5 * (lo[i] + hi[i]) - half).collect();
    let tc = 0.5 * (tlo + thi);
    GridSpec::new(corner, vec![2.0 * half; n], tc - half * half / 2.0, tc + half * half / 2.0, vec![cells; n], cells)
}

/// Weak-type mapping bounds for Wolff potentials, reported as LHS/RHS.
pub fn weak_mapping_check(mu: &DiscreteMeasure, spec: &PotentialSpec, opts: &WeakMapOptions) -> Result<VerificationReport> {
    mu.validate()?;
    if !mu.is_nonnegative() {
        return invalid("weak mapping needs a nonnegative measure");
    }
    let n = mu.dim as f64;
    let ap = spec.alpha * spec.p;
    let gamma = 1.0 / (spec.p - 1.0);
    let mut r = VerificationReport::new("weak-mapping")
        .param("alpha", spec.alpha)
        .param("p", spec.p)
        .param("R", spec.r)
        .param("variant", opts.variant)
        .param("cells", opts.cells);
    match opts.variant {
        WeakMapVariant::Total => {
            let grid = evaluation_grid(mu, opts.cells, opts.margin)?;
            let mass = mu.total_mass();
            let critical = (ap - (n + 2.0)).abs() < 1e-12;
            if ap > n + 2.0 + 1e-12 {
                return invalid("alpha p must not exceed N+2");
            }
            if critical && spec.r.is_none() {
                return invalid("alpha p = N+2 needs a finite truncation radius");
            }
            let wolff: Vec<f64> = grid.centers().iter().map(|z| wolff_potential(mu, spec, z)).collect::<Result<_>>()?;
            let mut vals = wolff.clone();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let vol = grid.cell_volume();
            let rhs = mass.powf(gamma);
            let lhs;
            if critical {
                // sup over levels λ > μ(ℝ^{N+1})^{1/(p-1)} of |{W > λ}| / ((μ^{1/(p-1)}/λ)^{(αp+ε(p-1))/ε} R^{αp})
                let e = (ap + opts.eps * (spec.p - 1.0)) / opts.eps;
                let rr = spec.radius();
                let mut best: f64 = 0.0;
                for (k, lam) in vals.iter().enumerate() {
                    let next = vals.get(k + 1).copied().unwrap_or(0.0);
                    if next == *lam || *lam <= rhs || rhs == 0.0 {
                        continue;
                    }
                    // |{W > λ'}| = (k+1)·vol for λ' just below `lam`
                    let level = lam.max(rhs);
                    best = best.max((k + 1) as f64 * vol / ((rhs / level).powf(e) * rr.powf(ap)));
                }
                lhs = best;
                r = r.param("eps", opts.eps).param("exponent", e);
                r.set_constant("C_2_eps", best);
                r.set_constant("ratio", best);
                r.worst_ratio = Num(best);
            } else {
                let q = (n + 2.0) * (spec.p - 1.0) / (n + 2.0 - ap);
                lhs = lorentz_sorted(&vals, &vec![vol; vals.len()], q, f64::INFINITY);
                let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
                r = r.param("weak_exponent", q);
                r.set_constant("ratio", ratio);
                r.worst_ratio = Num(ratio);
            }
            r.set_constant("lhs", lhs);
            r.set_constant("rhs", rhs);
        }
        WeakMapVariant::Morrey { q, theta } => {
            if !(spec.p > 1.0 && q > 1.0 && ap * q > 0.0 && ap * q < theta && theta <= n + 2.0) {
                return invalid("need p, q > 1 and 0 < alpha p q < theta <= N+2");
            }
            let Some(d) = mu.density.as_ref().filter(|d| !d.slab && mu.atoms.is_empty()) else {
                return invalid("the Morrey variant needs a space-time density without atoms");
            };
            let grid = evaluation_grid(mu, opts.cells, opts.margin)?;
            let wp: Vec<f64> = grid
                .centers()
                .iter()
                .map(|z| wolff_potential(mu, spec, z).map(|v| v.powf(spec.p - 1.0)))
                .collect::<Result<_>>()?;
            let qo = theta * q / (theta - ap * q);
            let lhs = lorentz_morrey_norm(&GridFunction::new(grid, wp)?, &NormSpec::calorie(qo, qo, theta))?;
            let rhs = lorentz_morrey_norm(&GridFunction::new(d.grid.clone(), d.values.clone())?, &NormSpec::calorie(q, q, theta))?;
            let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
            r = r.param("q", q).param("theta", theta).param("lhs_exponent", qo);
            r.set_constant("lhs", lhs);
            r.set_constant("rhs", rhs);
            r.set_constant("ratio", ratio);
            r.worst_ratio = Num(ratio);
        }
    }
    let ratio = r.constant("ratio").unwrap_or(f64::NAN);
    let pass = ratio.is_finite();
    Ok(r.finish(pass, if pass { "pass" } else { "fail" }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimePoint;
    use crate::measure::{Atom, Density};

    fn dirac2() -> DiscreteMeasure {
        DiscreteMeasure::dirac(&SpaceTimePoint::origin(2), 1.0)
    }

    #[test]
    fn good_lambda_zero_is_vacuous() {
        let g = GridSpec::cube(2, 1.0, 4, -0.5, 0.5, 4).unwrap();
        let r = good_lambda_check(&DiscreteMeasure::zero(2), &PotentialSpec::new(1.0), None, &Weight::uniform(&g)).unwrap();
        assert!(r.pass);
        assert_eq!(r.status, "vacuous");
    }

    #[test]
    fn good_lambda_single_atom_small_eps_empty() {
        // W = d^{-2}/2 and M = d^{-2} for a Dirac, so W > aλ and M ≤ ελ need ε > 2a
        let g = GridSpec::cube(2, 1.0, 6, -0.5, 0.5, 6).unwrap();
        let spec = PotentialSpec::new(1.0);
        let sweep = GoodLambdaGrid { eps: vec![0.5, 1.0, 2.0], lambda: vec![0.1, 0.5, 1.0] };
        let r = good_lambda_check(&dirac2(), &spec, Some(&sweep), &Weight::uniform(&g)).unwrap();
        assert_eq!(r.constant("nonempty_pairs"), Some(0.0));
        assert!(r.pass);
        assert_eq!(r.params["a"], serde_json::json!(11.0));
    }

    #[test]
    fn good_lambda_time_chain_fits_positive_decay() {
        let atoms = (0..10).map(|k| Atom::new(vec![0.0, 0.0], -0.45 + 0.1 * k as f64, 0.1)).collect();
        let mu = DiscreteMeasure::new(2, atoms, None).unwrap();
        let g = GridSpec::cube(2, 0.6, 8, -0.6, 0.6, 8).unwrap();
        let r = good_lambda_check(&mu, &PotentialSpec::new(1.0).truncated(1.0), None, &Weight::uniform(&g)).unwrap();
        assert!(r.constant("nonempty_pairs").unwrap() > 1.0, "{:?}", r.fitted_constants);
        assert!(r.pass, "{:?}", r.fitted_constants);
        assert!(r.constant("C_2").unwrap() > 0.0);
    }

    #[test]
    fn equivalence_dirac_ratio_is_half() {
        // W = d^{-2}/2 and M^{1} = d^{-2} pointwise
        let g = GridSpec::cube(2, 1.0, 6, -0.5, 0.5, 6).unwrap();
        let w = Weight::uniform(&g);
        let r = norm_equivalence_report(&dirac2(), &PotentialSpec::new(1.0), 2.0, 2.0, &w, 10.0).unwrap();
        assert!((r.constant("ratio").unwrap() - 0.5).abs() < 1e-9);
        assert!(r.pass);
        let r2 = norm_equivalence_report(&dirac2().scaled(3.0), &PotentialSpec::new(1.0), 2.0, 2.0, &w, 10.0).unwrap();
        assert!((r2.constant("wolff_norm").unwrap() / r.constant("wolff_norm").unwrap() - 3.0).abs() < 1e-9);
        assert!(norm_equivalence_report(&dirac2(), &PotentialSpec::new(1.0), 1.0, 2.0, &w, 10.0).is_err());
    }

    #[test]
    fn exp_integrability_paths() {
        let spec = PotentialSpec::new(1.0);
        let cyl = ParabolicCylinder::centered(SpaceTimePoint::origin(2), 1.0).unwrap();
        let opts = ExpIntegrabilityOptions { cells: 6, ..Default::default() };
        let z = exp_integrability_check(&DiscreteMeasure::zero(2), &spec, &cyl, &opts).unwrap();
        assert!(z.pass);
        assert_eq!(z.constant("C_2"), Some(1.0));
        let atom = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![0.05, 0.05], 0.01), 1.0);
        let bad = exp_integrability_check(&atom.scaled(100.0), &spec, &cyl, &opts).unwrap();
        assert_eq!(bad.status, "hypothesis violated");
        let sup = bad.constant("sup_maximal").unwrap() / 100.0;
        let ok = exp_integrability_check(&atom.scaled(1.0 / sup), &spec, &cyl, &opts).unwrap();
        assert!(ok.pass, "{:?}", ok.fitted_constants);
        assert!(ok.constant("C_2").unwrap().is_finite());
    }

    #[test]
    fn weak_mapping_dirac_and_scaling() {
        let spec = PotentialSpec::new(1.0);
        let opts = WeakMapOptions { cells: 12, ..Default::default() };
        let a = weak_mapping_check(&dirac2(), &spec, &opts).unwrap();
        let b = weak_mapping_check(&dirac2().scaled(4.0), &spec, &opts).unwrap();
        let (ra, rb) = (a.constant("ratio").unwrap(), b.constant("ratio").unwrap());
        assert!(a.pass && ra > 0.0);
        assert!((ra - rb).abs() < 1e-9 * ra);
        // continuum value: λ |{d^{-2}/2 > λ}|^{1/2} = (π/2)^{1/2}
        assert!((ra / (std::f64::consts::PI / 2.0).sqrt() - 1.0).abs() < 0.3, "{ra}");
    }

    #[test]
    fn weak_mapping_critical_and_morrey() {
        let spec = PotentialSpec::new(2.0).truncated(1.0);
        let r = weak_mapping_check(&dirac2(), &spec, &WeakMapOptions { cells: 10, ..Default::default() }).unwrap();
        assert!(r.pass && r.constant("C_2_eps").unwrap().is_finite());
        let g = GridSpec::cube(1, 0.5, 4, 0.0, 0.5, 4).unwrap();
        let vals = (0..16).map(|j| 1.0 + (j % 3) as f64).collect();
        let mu = DiscreteMeasure::from_density(Density::new(g, vals).unwrap()).unwrap();
        let opts = WeakMapOptions { cells: 8, variant: WeakMapVariant::Morrey { q: 1.5, theta: 3.0 }, ..Default::default() };
        let m = weak_mapping_check(&mu, &PotentialSpec::new(0.5), &opts).unwrap();
        assert!(m.pass, "{:?}", m.fitted_constants);
        assert!(weak_mapping_check(&dirac2(), &PotentialSpec::new(0.5), &opts).is_err());
    }
}
