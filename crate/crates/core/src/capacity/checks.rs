//! Comparisons between capacities of different kernels, and the
//! isoperimetric inequality.

use super::solver::solve_capacity;
use super::{CapacityKernel, CapacitySpec, CompactSet};
use crate::error::{invalid, Result};
use crate::geometry::{ParabolicCylinder, SpaceTimePoint};
use crate::report::{Samples, VerificationReport};
use serde::{Deserialize, Serialize};

/// Shape of the comparison between `Cap_A` and `Cap_B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceKind {
    /// `C^{-1} Cap_B ≤ Cap_A ≤ C Cap_B`, judged by the spread of `Cap_A/Cap_B`
    /// around its geometric mean.
    Ratio,
    /// `Cap_B ≤ Cap_A ≤ C (Cap_B + Cap_B^{(N+2)/(N+2-αp)})` with `A` the
    /// Bessel and `B` the heat kernel.
    Sandwich,
    /// `C^{-1} Cap_B(K) ≤ Cap_A(K × {0})` with `B` elliptic.
    Slice,
}

/// Capacities of one family under two kernels.
///
/// `acceptance` bounds the spread for [`EquivalenceKind::Ratio`] and the
/// fitted constant otherwise.
pub fn capacity_equivalence_report(
    family: &[CompactSet],
    spec_a: &CapacitySpec,
    spec_b: &CapacitySpec,
    kind: EquivalenceKind,
    acceptance: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("capacity_equivalence")
        .param("kind", kind)
        .param("spec_a", spec_a)
        .param("spec_b", spec_b)
        .param("acceptance", acceptance)
        .param("sets", family.len());
    let mut samples = Samples::new(&["set", "volume", "cap_a", "cap_b", "ratio", "gap_a", "gap_b"]);
    let mut ratios = Vec::new();
    let mut pairs = Vec::new();
    let mut converged = true;
    for (k, set) in family.iter().enumerate() {
        let a = solve_capacity(set, spec_a)?;
        let b = solve_capacity(set, spec_b)?;
        converged &= a.converged && b.converged;
        let ratio = if b.primal > 0.0 { a.primal / b.primal } else { f64::NAN };
        samples.push(&[k as f64, set.volume(), a.primal, b.primal, ratio, a.gap(), b.gap()]);
        if set.is_empty() {
            continue;
        }
        ratios.push(ratio);
        pairs.push((a.primal, b.primal));
    }
    report.samples = samples;
    if !converged {
        report.note("some capacity solves stopped before the requested gap; primal values are still feasible upper bounds");
    }
    if ratios.is_empty() {
        return Ok(report.finish(true, "vacuous"));
    }
    let (pass, worst) = match kind {
        EquivalenceKind::Ratio => {
            let center = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
            let worst = ratios.iter().map(|r| (r / center).max(center / r)).fold(1.0, f64::max);
            report.set_constant("C", center);
            report.set_constant("spread", worst);
            (worst <= acceptance, worst)
        }
        EquivalenceKind::Sandwich => {
            let n2 = family[0].grid.dim() as f64 + 2.0;
            let s = n2 - spec_b.alpha * spec_b.p;
            if !(s > 0.0) {
                return invalid("the sandwich needs alpha p < N + 2");
            }
            let e = n2 / s;
            let lower = pairs.iter().map(|(a, b)| b / a).fold(0.0, f64::max);
            let c1 = pairs.iter().map(|(a, b)| a / (b + b.powf(e))).fold(0.0, f64::max);
            report.set_constant("C_1", c1);
            report.set_constant("max_lower_ratio", lower);
            // the lower inequality is exact up to the solver tolerance
            let slack = 1.0 + 2.0 * spec_a.tolerance.max(spec_b.tolerance);
            (lower <= slack && c1 <= acceptance, c1.max(lower))
        }
        EquivalenceKind::Slice => {
            let c = ratios.iter().map(|r| 1.0 / r).fold(0.0, f64::max);
            report.set_constant("C", c);
            (c.is_finite() && c <= acceptance, c)
        }
    };
    report.worst_ratio = worst.into();
    let status = if pass { "pass" } else { "fail" };
    Ok(report.finish(pass, status))
}

/// `|E|^{1-αp/(N+2)} / Cap(E)` across a family; pass when the largest and
/// smallest ratio differ by at most `acceptance`.
pub fn isoperimetric_check(family: &[CompactSet], spec: &CapacitySpec, acceptance: f64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("isoperimetric")
        .param("spec", spec)
        .param("acceptance", acceptance)
        .param("sets", family.len());
    let Some(first) = family.first() else {
        return Ok(report.finish(true, "vacuous"));
    };
    let n = first.grid.dim() as f64;
    let homogeneous = if spec.kernel.is_elliptic() { n } else { n + 2.0 };
    if !(spec.alpha * spec.p < homogeneous) {
        return invalid("the isoperimetric inequality needs alpha p below the homogeneous dimension");
    }
    let exponent = 1.0 - spec.alpha * spec.p / homogeneous;
    let mut samples = Samples::new(&["set", "volume", "cap_primal", "cap_dual", "ratio"]);
    let mut ratios = Vec::new();
    for (k, set) in family.iter().enumerate() {
        let vol = if spec.kernel.is_elliptic() { set.spatial_volume() } else { set.volume() };
        let est = solve_capacity(set, spec)?;
        let ratio = if set.is_empty() { 0.0 } else { vol.powf(exponent) / est.primal };
        samples.push(&[k as f64, vol, est.primal, est.dual, ratio]);
        if !set.is_empty() {
            ratios.push(ratio);
        }
    }
    report.samples = samples;
    if ratios.is_empty() {
        return Ok(report.finish(true, "vacuous"));
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    report.set_constant("C", max);
    report.set_constant("min_ratio", min);
    let spread = max / min;
    report.worst_ratio = spread.into();
    let pass = spread.is_finite() && spread <= acceptance;
    if spec.kernel == CapacityKernel::RieszE && spec.r.is_some() {
        report.note("truncated kernel: the ratio is scale invariant only for sets well inside the truncation radius");
    }
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}

/// `Cap(Q̃_{2ρ}) / Cap(Q̃_ρ)` against `2^{N+2-αp}`, both cylinders centered
/// at the origin and discretized by the lattice nodes of spacing `(h, tau)`.
/// Pass when the ratio is within `acceptance` relative and both duality gaps
/// are below `max_gap`.
pub fn cylinder_scaling_check(
    spec: &CapacitySpec,
    dim: usize,
    rho: f64,
    h: f64,
    tau: f64,
    acceptance: f64,
    max_gap: f64,
) -> Result<VerificationReport> {
    spec.validate(dim)?;
    let expected = 2f64.powf(dim as f64 + 2.0 - spec.alpha * spec.p);
    let mut report = VerificationReport::new("capacity_scaling")
        .param("spec", spec)
        .param("dim", dim)
        .param("rho", rho)
        .param("h", h)
        .param("tau", tau)
        .param("acceptance", acceptance)
        .param("max_gap", max_gap);
    let mut samples = Samples::new(&["rho", "targets", "sources", "primal", "dual", "gap"]);
    let mut caps = Vec::new();
    let mut worst_gap = 0.0f64;
    for r in [rho, 2.0 * rho] {
        let cyl = ParabolicCylinder::centered(SpaceTimePoint::origin(dim), r)?;
        let set = CompactSet::cylinder_nodes(&cyl, h, tau)?;
        let est = solve_capacity(&set, spec)?;
        samples.push(&[r, est.targets as f64, est.sources as f64, est.primal, est.dual, est.gap()]);
        worst_gap = worst_gap.max(est.gap());
        caps.push(est.primal);
    }
    report.samples = samples;
    let ratio = caps[1] / caps[0];
    report.set_constant("ratio", ratio);
    report.set_constant("expected", expected);
    report.set_constant("relative_error", ratio / expected - 1.0);
    report.set_constant("max_gap", worst_gap);
    report.worst_ratio = (ratio / expected).into();
    let pass = (ratio / expected - 1.0).abs() <= acceptance && worst_gap < max_gap;
    Ok(report.finish(pass, if pass { "pass" } else { "fail" }))
}
