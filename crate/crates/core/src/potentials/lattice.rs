//! Riesz potentials of gridded densities evaluated at the cell centers of the
//! same grid, through a translation-invariant table of cell integrals.

use super::kernels::box_profile;
use super::radial::{integrate, RadialWeight};
use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::measure::{Density, DiscreteMeasure};
use super::riesz_potential;

/// Precomputed `I_α^{R,δ}` operator on one grid.
#[derive(Debug, Clone)]
pub struct LatticePotential {
    pub grid: GridSpec,
    pub spec: PotentialSpec,
    // extents per axis, time first, of the nonnegative offset table
    ext: Vec<usize>,
    table: Vec<f64>,
}

impl LatticePotential {
    pub fn new(grid: &GridSpec, spec: &PotentialSpec) -> Result<Self> {
        grid.validate()?;
        let n = grid.dim();
        spec.validate(n)?;
        let s = n as f64 + 2.0 - spec.alpha;
        let w = RadialWeight::potential(spec.radius(), spec.delta);
        let mut ext = vec![grid.steps];
        ext.extend(grid.cells.iter().copied());
        let len: usize = ext.iter().product();
        let h: Vec<f64> = (0..n).map(|i| grid.h(i)).collect();
        let tau = grid.tau();
        let origin = vec![0.0; n];
        // the kernel is even in every coordinate, so only nonnegative offsets are stored
        let table = (0..len)
            .map(|flat| {
                let idx = unflatten(flat, &ext);
                let lo: Vec<f64> = (0..n).map(|i| (idx[i + 1] as f64 - 0.5) * h[i]).collect();
                let hi: Vec<f64> = (0..n).map(|i| (idx[i + 1] as f64 + 0.5) * h[i]).collect();
                let tw = ((idx[0] as f64 - 0.5) * tau, (idx[0] as f64 + 0.5) * tau);
                let profile = box_profile(&origin, 0.0, &lo, &hi, tw, false, spec.quadrature.rho_min);
                integrate(&profile, s, 1.0, &w, spec.quadrature.points_per_decade)
            })
            .collect();
        Ok(Self { grid: grid.clone(), spec: spec.clone(), ext, table })
    }

    /// Potential at the origin cell center of the unit density on the cell
    /// at index offset `off` (time first).
    pub fn entry(&self, off: &[isize]) -> f64 {
        let idx: Vec<usize> = off.iter().map(|o| o.unsigned_abs()).collect();
        if idx.len() != self.ext.len() || idx.iter().zip(&self.ext).any(|(i, e)| i >= e) {
            return 0.0;
        }
        self.table[flatten(&idx, &self.ext)]
    }

    /// `I[f]` at every cell center for a nonnegative cell density `f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: f.len() });
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SignedMeasure("lattice potential needs a finite nonnegative density".into()));
        }
        let len = f.len();
        let support: Vec<(Vec<usize>, f64)> =
            (0..len).filter(|&j| f[j] != 0.0).map(|j| (unflatten(j, &self.ext), f[j])).collect();
        let mut off = vec![0usize; self.ext.len()];
        let out = (0..len)
            .map(|i| {
                let a = unflatten(i, &self.ext);
                let mut acc = 0.0;
                for (b, v) in &support {
                    for k in 0..off.len() {
                        off[k] = a[k].abs_diff(b[k]);
                    }
                    acc += self.table[flatten(&off, &self.ext)] * v;
                }
                acc
            })
            .collect();
        Ok(out)
    }

    pub fn apply_fn(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.grid {
            return Err(Error::InvalidParameter("grid function lives on another grid".into()));
        }
        GridFunction::new(self.grid.clone(), self.apply(&f.values)?)
    }
}

pub(crate) fn lattice_for<'a>(grid: &GridSpec, spec: &PotentialSpec, cache: &'a mut Vec<LatticePotential>) -> Result<&'a LatticePotential> {
    if let Some(i) = cache.iter().position(|l| &l.grid == grid && &l.spec == spec) {
        return Ok(&cache[i]);
    }
    cache.push(LatticePotential::new(grid, spec)?);
    Ok(cache.last().expect("just pushed"))
}

/// Density values moved onto `grid` when both lattices coincide and the
/// support fits inside.
pub(crate) fn embed(d: &Density, grid: &GridSpec) -> Option<Vec<f64>> {
    if d.slab {
        return None;
    }
    let n = grid.dim();
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !same(d.grid.tau(), grid.tau()) || (0..n).any(|i| !same(d.grid.h(i), grid.h(i))) {
        return None;
    }
    let shift = |a: f64, b: f64, h: f64| -> Option<i64> {
        let u = (a - b) / h;
        ((u - u.round()).abs() < 1e-6).then_some(u.round() as i64)
    };
    let mut offs = Vec::with_capacity(n);
    for i in 0..n {
        offs.push(shift(d.grid.corner[i], grid.corner[i], grid.h(i))?);
    }
    let toff = shift(d.grid.t0, grid.t0, grid.tau())?;
    let mut out = vec![0.0; grid.len()];
    let m = d.grid.spatial_len();
    for (i, v) in d.values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let (k, s) = (i / m, i % m);
        let idx = d.grid.spatial_index(s);
        let kk = k as i64 + toff;
        if kk < 0 || kk >= grid.steps as i64 {
            return None;
        }
        let mut target = Vec::with_capacity(n);
        for a in 0..n {
            let j = idx[a] as i64 + offs[a];
            if j < 0 || j >= grid.cells[a] as i64 {
                return None;
            }
            target.push(j as usize);
        }
        out[kk as usize * grid.spatial_len() + grid.spatial_linear(&target)] += v;
    }
    Some(out)
}

/// `I[μ]` at the centers of the listed cells, through the lattice table when
/// the density lives on the same lattice.
pub(crate) fn potential_at_cells(
    mu: &DiscreteMeasure,
    spec: &PotentialSpec,
    grid: &GridSpec,
    cells: &[usize],
    cache: &mut Vec<LatticePotential>,
) -> Result<Vec<f64>> {
    let atoms = DiscreteMeasure { dim: mu.dim, atoms: mu.atoms.clone(), density: None };
    let mut out: Vec<f64> = if atoms.is_zero() {
        vec![0.0; cells.len()]
    } else {
        cells.iter().map(|&c| riesz_potential(&atoms, spec, &grid.center(c))).collect::<Result<_>>()?
    };
    if let Some(d) = mu.density.as_ref() {
        if let Some(values) = embed(d, grid) {
            let full = lattice_for(grid, spec, cache)?.apply(&values)?;
            for (o, &c) in out.iter_mut().zip(cells) {
                *o += full[c];
            }
        } else {
            let dens = DiscreteMeasure { dim: mu.dim, atoms: Vec::new(), density: Some(d.clone()) };
            for (o, &c) in out.iter_mut().zip(cells) {
                *o += riesz_potential(&dens, spec, &grid.center(c))?;
            }
        }
    }
    Ok(out)
}

fn unflatten(mut flat: usize, ext: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; ext.len()];
    for k in (0..ext.len()).rev() {
        idx[k] = flat % ext[k];
        flat /= ext[k];
    }
    idx
}

fn flatten(idx: &[usize], ext: &[usize]) -> usize {
    idx.iter().zip(ext).fold(0, |acc, (i, e)| acc * e + i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Density, DiscreteMeasure};
    use crate::potentials::riesz_potential;

    #[test]
    fn matches_pointwise_potential() {
        let g = GridSpec::cube(2, 1.0, 4, 0.0, 1.0, 3).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|j| ((j * 7) % 5) as f64 * 0.3).collect();
        let spec = PotentialSpec::new(1.5).with_decay(2.0, 0.5);
        let lat = LatticePotential::new(&g, &spec).unwrap();
        let got = lat.apply(&vals).unwrap();
        let mu = DiscreteMeasure::from_density(Density::new(g.clone(), vals).unwrap()).unwrap();
        for i in [0, 5, 17, 30, 47] {
            let want = riesz_potential(&mu, &spec, &g.center(i)).unwrap();
            assert!((got[i] - want).abs() < 1e-6 * want, "{i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn zero_and_outside() {
        let g = GridSpec::cube(1, 1.0, 3, 0.0, 1.0, 2).unwrap();
        let lat = LatticePotential::new(&g, &PotentialSpec::new(1.0)).unwrap();
        assert!(lat.apply(&[0.0; 6]).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(lat.entry(&[5, 0]), 0.0);
        assert!(lat.entry(&[0, 0]) > lat.entry(&[0, 1]));
        assert!(lat.apply(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }
}
