//! Accelerated projected ascent on the capacity dual.
//!
//! For the discrete program `min Σ_j v f_j^p` subject to `A f ≥ 1` and `f ≥ 0`
//! the concave dual in the multipliers `ν ≥ 0` is
//! `D(ν) = Σ ν_i - (v/p') Σ_j (g_j)_+^{p'}` with `g = Aᵀν / v`.
//! Every iterate certifies two bounds:
//! * Hölder: `(Σν / ‖g‖_{p',v})^p ≤ cap`,
//! * feasibility: `f = g^{p'-1}` rescaled to `min A f = 1` gives `cap ≤ Σ v f^p`.

use super::matrix::{KernelMatrix, SourceBox};
use super::{CapacitySpec, CompactSet, SolverChoice};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Feasible-point value, an upper bound for the discrete capacity.
    #[serde(with = "crate::report::num_f64")]
    pub primal: f64,
    /// Hölder certificate, a lower bound for the discrete capacity.
    #[serde(with = "crate::report::num_f64")]
    pub dual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub targets: usize,
    pub sources: usize,
}

impl CapacityEstimate {
    pub fn gap(&self) -> f64 {
        if self.primal == 0.0 {
            0.0
        } else {
            (self.primal - self.dual) / self.primal
        }
    }

    /// The estimate the spec's solver choice asks for.
    pub fn value(&self, choice: SolverChoice) -> f64 {
        match choice {
            SolverChoice::Dual => self.dual,
            _ => self.primal,
        }
    }

    fn zero() -> Self {
        Self { primal: 0.0, dual: 0.0, iterations: 0, converged: true, targets: 0, sources: 0 }
    }
}

/// Solve on the default source box of the set.
pub fn solve_capacity(set: &CompactSet, spec: &CapacitySpec) -> Result<CapacityEstimate> {
    let src = SourceBox::around(set, spec);
    solve_capacity_in(set, spec, &src)
}

/// Solve with an explicit source box, shared by sets of one grid.
pub fn solve_capacity_in(set: &CompactSet, spec: &CapacitySpec, sources: &SourceBox) -> Result<CapacityEstimate> {
    spec.validate(set.grid.dim())?;
    if set.is_empty() {
        return Ok(CapacityEstimate::zero());
    }
    let a = KernelMatrix::new(set, spec, sources)?;
    solve_matrix(&a, spec)
}

/// Upper estimate; errors if the bounds did not meet within tolerance.
pub fn capacity_primal(set: &CompactSet, spec: &CapacitySpec) -> Result<f64> {
    let est = solve_capacity(set, spec)?;
    if !est.converged {
        return Err(Error::NotConverged { iterations: est.iterations, residual: est.gap() });
    }
    Ok(est.primal)
}

/// Lower estimate; errors if the bounds did not meet within tolerance.
pub fn capacity_dual(set: &CompactSet, spec: &CapacitySpec) -> Result<f64> {
    let est = solve_capacity(set, spec)?;
    if !est.converged {
        return Err(Error::NotConverged { iterations: est.iterations, residual: est.gap() });
    }
    Ok(est.dual)
}

struct Dual<'a> {
    a: &'a KernelMatrix,
    pp: f64,
    p: f64,
}

impl Dual<'_> {
    /// `D(ν)` from `u = Aᵀν`.
    fn value(&self, nu: &[f64], u: &[f64]) -> f64 {
        let v = self.a.volume;
        let s: f64 = nu.iter().sum();
        s - v / self.pp * u.iter().map(|x| (x / v).max(0.0).powf(self.pp)).sum::<f64>()
    }

    fn density(&self, u: &[f64]) -> Vec<f64> {
        let v = self.a.volume;
        u.iter().map(|x| (x / v).max(0.0).powf(self.pp - 1.0)).collect()
    }

    fn lower(&self, nu: &[f64], u: &[f64]) -> f64 {
        let v = self.a.volume;
        let s: f64 = nu.iter().sum();
        let norm = (v * u.iter().map(|x| (x / v).max(0.0).powf(self.pp)).sum::<f64>()).powf(1.0 / self.pp);
        if norm == 0.0 {
            0.0
        } else {
            (s / norm).powf(self.p)
        }
    }

    fn upper(&self, f: &[f64], af: &[f64]) -> f64 {
        let m = af.iter().copied().fold(f64::INFINITY, f64::min);
        if !(m > 0.0) {
            return f64::INFINITY;
        }
        self.a.volume * f.iter().map(|x| x.powf(self.p)).sum::<f64>() / m.powf(self.p)
    }
}

pub(crate) fn solve_matrix(a: &KernelMatrix, spec: &CapacitySpec) -> Result<CapacityEstimate> {
    let t = a.targets();
    let s = a.source_len();
    if t == 0 {
        return Ok(CapacityEstimate::zero());
    }
    let d = Dual { a, pp: spec.p_prime(), p: spec.p };
    let mut nu = vec![1.0; t];
    let mut u = vec![0.0; s];
    a.apply_transpose(&nu, &mut u);
    // best multiple of the constant start
    let scale = {
        let sum = t as f64;
        let q: f64 = a.volume * u.iter().map(|x| (x / a.volume).powf(d.pp)).sum::<f64>();
        (sum / q).powf(1.0 / (d.pp - 1.0))
    };
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::NonFinite("kernel matrix".into()));
    }
    nu.iter_mut().for_each(|x| *x *= scale);
    u.iter_mut().for_each(|x| *x *= scale);
    let mut dv = d.value(&nu, &u);

    // curvature estimate of D along the gradient at the start
    let mut af = vec![0.0; t];
    let f0 = d.density(&u);
    a.apply(&f0, &mut af);
    let mut lip = {
        let g: Vec<f64> = af.iter().map(|x| 1.0 - x).collect();
        let mut ug = vec![0.0; s];
        a.apply_transpose(&g, &mut ug);
        let gg: f64 = g.iter().map(|x| x * x).sum();
        let mean = u.iter().sum::<f64>() / (s as f64 * a.volume);
        let curv = (d.pp - 1.0) * mean.max(1e-300).powf(d.pp - 2.0) * ug.iter().map(|x| x * x).sum::<f64>() / a.volume;
        if gg > 0.0 && curv > 0.0 {
            curv / gg
        } else {
            1.0
        }
    };

    let mut best_lower = d.lower(&nu, &u);
    let mut best_upper = d.upper(&f0, &af);
    let mut y = nu.clone();
    let mut uy = u.clone();
    let mut momentum = 1.0f64;
    let mut next = vec![0.0; t];
    let mut unext = vec![0.0; s];
    let check_every = 5;
    let mut iterations = 0;
    let mut converged = (best_upper - best_lower) <= spec.tolerance * best_upper;
    while !converged && iterations < spec.iterations {
        iterations += 1;
        let fy = d.density(&uy);
        a.apply(&fy, &mut af);
        let dy = d.value(&y, &uy);
        let grad: Vec<f64> = af.iter().map(|x| 1.0 - x).collect();
        let mut dnext;
        loop {
            for i in 0..t {
                next[i] = (y[i] + grad[i] / lip).max(0.0);
            }
            a.apply_transpose(&next, &mut unext);
            dnext = d.value(&next, &unext);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..t {
                let step = next[i] - y[i];
                lin += grad[i] * step;
                sq += step * step;
            }
            if dnext >= dy + lin - 0.5 * lip * sq - 1e-14 * dy.abs() || sq == 0.0 {
                break;
            }
            lip *= 2.0;
        }
        if dnext < dv {
            // restart the momentum from the last iterate
            momentum = 1.0;
            y.copy_from_slice(&nu);
            uy.copy_from_slice(&u);
            continue;
        }
        let m_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / m_next;
        for i in 0..t {
            y[i] = next[i] + beta * (next[i] - nu[i]);
        }
        for j in 0..s {
            uy[j] = unext[j] + beta * (unext[j] - u[j]);
        }
        std::mem::swap(&mut nu, &mut next);
        std::mem::swap(&mut u, &mut unext);
        dv = dnext;
        momentum = m_next;
        lip *= 0.95;

        if iterations % check_every == 0 || iterations == spec.iterations {
            best_lower = best_lower.max(d.lower(&nu, &u));
            let f = d.density(&u);
            a.apply(&f, &mut af);
            best_upper = best_upper.min(d.upper(&f, &af));
            converged = best_upper - best_lower <= spec.tolerance * best_upper;
            log::debug!("capacity iteration {iterations}: [{best_lower:.6e}, {best_upper:.6e}]");
        }
    }
    Ok(CapacityEstimate { primal: best_upper, dual: best_lower, iterations, converged, targets: t, sources: s })
}

#[cfg(test)]
mod tests {
    use super::super::CapacityKernel;
    use super::*;
    use crate::geometry::{ParabolicCylinder, SpaceTimePoint};
    use crate::grid::GridSpec;
    use crate::potentials::{kernel_eval, Kernel, KernelKind, PotentialSpec};

    #[test]
    fn empty_set_has_zero_capacity() {
        let g = GridSpec::cube(2, 1.0, 4, 0.0, 1.0, 4).unwrap();
        let spec = CapacitySpec::new(CapacityKernel::RieszE, 1.0, 2.0);
        assert_eq!(capacity_primal(&CompactSet::empty(g.clone()), &spec).unwrap(), 0.0);
        assert_eq!(capacity_dual(&CompactSet::empty(g), &spec).unwrap(), 0.0);
    }

    #[test]
    fn single_cell_matches_hand_quadrature() {
        // one target: cap = (Σ_j v (A_j / v)^{p'})^{-p/p'}, with A_j the cell
        // integrals, here recomputed by a tensor midpoint rule
        let g = GridSpec::cube(1, 0.5, 1, -0.5, 0.5, 1).unwrap();
        let set = CompactSet::new(g, vec![0]).unwrap();
        let spec = CapacitySpec::new(CapacityKernel::RieszE, 2.5, 2.0).with_tolerance(1e-9);
        let src = SourceBox { lo: vec![-2, -2], ext: vec![5, 5] };
        let est = solve_capacity_in(&set, &spec, &src).unwrap();
        assert!(est.converged);
        let pspec = PotentialSpec::new(2.5);
        let k = Kernel::forward(KernelKind::RieszE);
        let sub = 64;
        let mut total = 0.0;
        for jx in -2..=2 {
            for jt in -2..=2 {
                let mut acc = 0.0;
                for a in 0..sub {
                    for b in 0..sub {
                        let y = jx as f64 + (a as f64 + 0.5) / sub as f64 - 0.5;
                        let s = jt as f64 + (b as f64 + 0.5) / sub as f64 - 0.5;
                        acc += kernel_eval(k, &pspec, &SpaceTimePoint::new(vec![-y], -s)).unwrap();
                    }
                }
                let cell = acc / (sub * sub) as f64;
                total += cell * cell;
            }
        }
        let expected = 1.0 / total;
        assert!((est.primal / expected - 1.0).abs() < 1e-3, "{} {expected}", est.primal);
        assert!((est.dual / expected - 1.0).abs() < 1e-3, "{} {expected}", est.dual);
    }

    #[test]
    fn bounds_bracket_on_a_cylinder() {
        let cyl = ParabolicCylinder::centered(SpaceTimePoint::new(vec![0.0, 0.0], 0.0), 1.0).unwrap();
        let set = CompactSet::cylinder_nodes(&cyl, 0.5, 0.25).unwrap();
        for kernel in [CapacityKernel::RieszE, CapacityKernel::HeatH, CapacityKernel::BesselG] {
            for p in [1.5, 2.0, 3.0] {
                let spec = CapacitySpec::new(kernel, 1.5, p).with_tolerance(1e-2);
                let est = solve_capacity(&set, &spec).unwrap();
                assert!(est.converged, "{kernel:?} p={p}: {est:?}");
                assert!(est.dual <= est.primal * (1.0 + 1e-12) && est.dual > 0.0, "{est:?}");
            }
        }
    }
}
