//! Cell-centered finite differences in a box with zero boundary values.
//!
//! The boundary condition is imposed through ghost cells holding zero. The
//! state starts at zero at `t0`; data are deposited per cell and time step and
//! released uniformly over the step, so the first output, at the center of
//! the first time cell, is reached with a half step.

use super::{HeatProblem, Scheme};
use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::measure::DiscreteMeasure;

/// Zeroth-order term `∓|u|^{q-1}u` added to the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub q: f64,
    /// `true` for the source sign `+|u|^{q-1}u` on the right-hand side.
    pub source: bool,
    /// Values above this abort the march.
    pub ceiling: f64,
}

pub fn solve_dirichlet(pr: &HeatProblem) -> Result<GridFunction> {
    let m = march(pr, None, None)?;
    Ok(m.u)
}

/// Dirichlet solve with an extra gridded source density and an optional
/// power-law term treated semi-implicitly.
pub fn solve_dirichlet_with(pr: &HeatProblem, extra: Option<&[f64]>, absorption: Option<Absorption>) -> Result<GridFunction> {
    let m = march(pr, extra, absorption)?;
    match m.blown_up_at {
        Some(k) => Err(Error::NonFinite(format!("solution exceeded the ceiling at time step {k}"))),
        None => Ok(m.u),
    }
}

pub(crate) struct March {
    pub u: GridFunction,
    pub blown_up_at: Option<usize>,
}

pub(crate) fn march(pr: &HeatProblem, extra: Option<&[f64]>, absorption: Option<Absorption>) -> Result<March> {
    pr.validate()?;
    let g = &pr.grid;
    let m = g.spatial_len();
    let mut f = deposit(&pr.data()?, g)?;
    if let Some(e) = extra {
        if e.len() != g.len() {
            return Err(Error::DimensionMismatch { expected: g.len(), found: e.len() });
        }
        for (a, b) in f.iter_mut().zip(e) {
            *a += b;
        }
    }
    let lap = Laplacian::new(g);
    let tau = g.tau();
    let mut u = vec![0.0; m];
    let mut out = vec![0.0; g.len()];
    let mut src = vec![0.0; m];
    let mut blown_up_at = None;
    for k in 0..g.steps {
        let dt = if k == 0 { tau / 2.0 } else { tau };
        for i in 0..m {
            src[i] = if k == 0 { f[i] } else { 0.5 * (f[(k - 1) * m + i] + f[k * m + i]) };
        }
        let next = match pr.scheme {
            Scheme::Explicit => {
                let mut lu = vec![0.0; m];
                lap.apply(&u, &mut lu);
                (0..m).map(|i| u[i] + dt * (lu[i] + src[i])).collect::<Vec<_>>()
            }
            Scheme::CrankNicolson => {
                let mut lu = vec![0.0; m];
                lap.apply(&u, &mut lu);
                let rhs: Vec<f64> = (0..m).map(|i| u[i] + 0.5 * dt * lu[i] + dt * src[i]).collect();
                lap.solve_shifted(0.5 * dt, &rhs, &u)?
            }
        };
        u = match absorption {
            None => next,
            Some(a) => next
                .iter()
                .zip(&u)
                .map(|(v, old)| {
                    let c = old.abs().powf(a.q - 1.0);
                    if a.source {
                        v + dt * c * old
                    } else {
                        v / (1.0 + dt * c)
                    }
                })
                .collect(),
        };
        if let Some(a) = absorption {
            if u.iter().any(|v| !v.is_finite() || v.abs() > a.ceiling) {
                blown_up_at = Some(k);
                out[k * m..(k + 1) * m].copy_from_slice(&u.iter().map(|v| if v.is_finite() { *v } else { a.ceiling }).collect::<Vec<_>>());
                break;
            }
        }
        out[k * m..(k + 1) * m].copy_from_slice(&u);
    }
    if blown_up_at.is_none() && out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("finite-difference solution".into()));
    }
    Ok(March { u: GridFunction { grid: g.clone(), values: out }, blown_up_at })
}

/// Source density per cell and time step; every atom and density cell goes
/// whole into the cell containing it (density cells by their centers).
pub(crate) fn deposit(data: &DiscreteMeasure, g: &GridSpec) -> Result<Vec<f64>> {
    let m = g.spatial_len();
    let vol = g.cell_volume();
    let mut f = vec![0.0; g.len()];
    let mut put = |x: &[f64], t: f64, mass: f64| -> Result<()> {
        if mass == 0.0 || t >= g.t1 {
            return Ok(());
        }
        if t < g.t0 {
            return invalid(format!("datum at t = {t} precedes the grid start {}", g.t0));
        }
        let s = g.locate_spatial(x).ok_or_else(|| Error::InvalidParameter("the box must contain every atom strictly".into()))?;
        let k = g.locate_time(t).expect("time inside the grid");
        f[k * m + s] += mass / vol;
        Ok(())
    };
    for a in &data.atoms {
        put(&a.x, a.t, a.mass)?;
    }
    if let Some(d) = &data.density {
        if !d.slab && &d.grid == g {
            for (a, b) in f.iter_mut().zip(&d.values) {
                *a += b;
            }
        } else {
            let dm = d.grid.spatial_len();
            let cv = d.cell_volume();
            for (i, v) in d.values.iter().enumerate() {
                let (k, s) = (i / dm, i % dm);
                let t = if d.slab { 0.0 } else { d.grid.time_center(k) };
                put(&d.grid.spatial_center(s), t, v * cv)?;
            }
        }
    }
    Ok(f)
}

/// Standard `2N+1`-point Laplacian with zero ghost cells.
pub(crate) struct Laplacian {
    cells: Vec<usize>,
    stride: Vec<usize>,
    inv_h2: Vec<f64>,
}

impl Laplacian {
    pub fn new(g: &GridSpec) -> Self {
        let n = g.dim();
        let mut stride = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            stride[i] = stride[i + 1] * g.cells[i + 1];
        }
        Self { cells: g.cells.clone(), stride, inv_h2: (0..n).map(|i| 1.0 / (g.h(i) * g.h(i))).collect() }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.cells.len();
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..n {
                let j = (s / self.stride[a]) % self.cells[a];
                let left = if j > 0 { u[s - self.stride[a]] } else { 0.0 };
                let right = if j + 1 < self.cells[a] { u[s + self.stride[a]] } else { 0.0 };
                acc += (left - 2.0 * u[s] + right) * self.inv_h2[a];
            }
            *o = acc;
        }
    }

    /// Solves `(I - c L) x = b` by conjugate gradients from `x0`.
    pub fn solve_shifted(&self, c: f64, b: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
        let m = b.len();
        let op = |x: &[f64], out: &mut [f64]| {
            self.apply(x, out);
            for i in 0..m {
                out[i] = x[i] - c * out[i];
            }
        };
        let mut x = x0.to_vec();
        let mut ax = vec![0.0; m];
        op(&x, &mut ax);
        let mut r: Vec<f64> = (0..m).map(|i| b[i] - ax[i]).collect();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let bb: f64 = b.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        let mut ap = vec![0.0; m];
        let max_iter = 10 * m + 100;
        for _ in 0..max_iter {
            if rr <= 1e-26 * bb {
                return Ok(x);
            }
            op(&p, &mut ap);
            let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            for i in 0..m {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(Error::NotConverged { iterations: max_iter, residual: (rr / bb).sqrt() })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_free_space, Domain};
    use super::*;
    use crate::geometry::SpaceTimePoint;
    use crate::measure::{Atom, Density};
    use std::f64::consts::PI;

    fn problem(mu: DiscreteMeasure, sigma: DiscreteMeasure, g: GridSpec, scheme: Scheme) -> HeatProblem {
        HeatProblem::new(mu, sigma, Domain::DirichletBox, g, scheme).unwrap()
    }

    #[test]
    fn zero_data_give_zero() {
        let g = GridSpec::cube(2, 1.0, 8, 0.0, 0.5, 40).unwrap();
        let u = solve_dirichlet(&problem(DiscreteMeasure::zero(2), DiscreteMeasure::zero(2), g, Scheme::Explicit)).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn explicit_scheme_keeps_sign_and_stays_below_free_space() {
        let mu = DiscreteMeasure::new(2, vec![Atom::new(vec![0.13, -0.17], 0.051, 1.0), Atom::new(vec![-0.47, 0.43], 0.203, 0.5)], None).unwrap();
        let g = GridSpec::cube(2, 1.0, 20, 0.0, 0.4, 200).unwrap();
        let pr = problem(mu, DiscreteMeasure::zero(2), g.clone(), Scheme::Explicit);
        let u = solve_dirichlet(&pr).unwrap();
        assert!(u.values.iter().all(|v| *v >= 0.0));
        // the discrete Dirichlet solution is dominated by the discrete whole-space one
        let big = GridSpec::cube(2, 3.0, 60, 0.0, 0.4, 200).unwrap();
        let wide = solve_dirichlet(&problem(pr.mu.clone(), DiscreteMeasure::zero(2), big.clone(), Scheme::Explicit)).unwrap();
        let m = g.spatial_len();
        for k in 0..g.steps {
            for s in 0..m {
                let idx = g.spatial_index(s);
                let ws = big.spatial_linear(&idx.iter().map(|i| i + 20).collect::<Vec<_>>());
                assert!(u.values[k * m + s] <= wide.values[k * big.spatial_len() + ws] + 1e-12);
            }
        }
    }

    #[test]
    fn far_from_the_wall_matches_free_space() {
        let sigma = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![0.0, 0.0], 0.0), 1.0);
        let g = GridSpec::cube(2, 2.0, 41, 0.0, 0.3, 150).unwrap();
        let pr = problem(DiscreteMeasure::zero(2), sigma.clone(), g.clone(), Scheme::Explicit);
        let u = solve_dirichlet(&pr).unwrap();
        let exact = solve_free_space(&HeatProblem { domain: Domain::FreeSpace, ..pr.clone() }).unwrap();
        // compare at the last step where the Gaussian is resolved by the grid
        let k = g.steps - 1;
        let m = g.spatial_len();
        let peak = exact.values[k * m..(k + 1) * m].iter().copied().fold(0.0, f64::max);
        let worst = (0..m).map(|s| (u.values[k * m + s] - exact.values[k * m + s]).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05 * peak, "{worst} {peak}");
    }

    #[test]
    fn schemes_agree_on_a_manufactured_solution() {
        // u = e^{-2t} cos x cos y on (-π/2, π/2)² solves u_t = Δu with zero boundary values
        let half = PI / 2.0;
        let exact = |x: &[f64], t: f64| (-2.0 * t).exp() * x[0].cos() * x[1].cos();
        let run = |n: usize, steps: usize, scheme: Scheme| {
            let g = GridSpec::cube(2, half, n, 0.0, 0.5, steps).unwrap();
            let gi = GridSpec::cube(2, half, n, -1.0, 1.0, 1).unwrap();
            let init = Density::slab(gi.clone(), (0..gi.spatial_len()).map(|s| exact(&gi.spatial_center(s), 0.0)).collect()).unwrap();
            let sigma = DiscreteMeasure::from_density(init).unwrap();
            let u = solve_dirichlet(&problem(DiscreteMeasure::zero(2), sigma, g.clone(), scheme)).unwrap();
            let k = steps - 1;
            let m = g.spatial_len();
            (0..m).map(|s| (u.values[k * m + s] - exact(&g.spatial_center(s), g.time_center(k))).abs()).fold(0.0, f64::max)
        };
        let e_exp = run(24, 200, Scheme::Explicit);
        let e_cn = run(24, 50, Scheme::CrankNicolson);
        assert!(e_exp < 0.03 && e_cn < 0.03, "{e_exp} {e_cn}");
        // halving h and τ reduces both errors
        assert!(run(48, 800, Scheme::Explicit) < e_exp);
        assert!(run(48, 100, Scheme::CrankNicolson) < e_cn);
    }

    #[test]
    fn linearity() {
        let g = GridSpec::cube(1, 1.0, 16, 0.0, 0.5, 80).unwrap();
        let a = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![0.2], 0.1), 1.0);
        let b = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![-0.3], 0.2), -2.0);
        for scheme in [Scheme::Explicit, Scheme::CrankNicolson] {
            let s = |m: DiscreteMeasure| solve_dirichlet(&problem(m, DiscreteMeasure::zero(1), g.clone(), scheme)).unwrap();
            let (ua, ub, uab) = (s(a.clone()), s(b.clone()), s(a.plus(&b).unwrap()));
            for i in 0..g.len() {
                assert!((ua.values[i] + ub.values[i] - uab.values[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn atoms_outside_the_box_are_rejected() {
        let g = GridSpec::cube(1, 1.0, 16, 0.0, 0.5, 80).unwrap();
        let far = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![3.0], 0.1), 1.0);
        assert!(solve_dirichlet(&problem(far, DiscreteMeasure::zero(1), g, Scheme::Explicit)).is_err());
    }
}
