//! Kernel matrices between lattice targets and source cells.
//!
//! Targets and sources share one lattice, so every entry depends only on the
//! integer offset between them. Entries are exact cell integrals of the kernel,
//! which also handles the singular cell containing the target. The matrix is
//! stored as a dense offset table and applied by direct summation.

use super::{CapacitySpec, CompactSet};
use crate::error::{Error, Result};
use crate::geometry::SpaceTimePoint;
use crate::potentials::{cell_kernel_integral, elliptic_cell_integral};
use std::collections::HashMap;

/// Box of source cells in lattice coordinates of a set's grid
/// (spatial axes first, time last; no time axis for elliptic kernels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBox {
    pub lo: Vec<i64>,
    pub ext: Vec<usize>,
}

impl SourceBox {
    /// Bounding box of the set padded by `margin` set radii, in the past only
    /// for causal kernels.
    pub fn around(set: &CompactSet, spec: &CapacitySpec) -> Self {
        let coords = lattice_coords(set, spec);
        let a = axes(set, spec);
        if coords.is_empty() {
            return Self { lo: vec![0; a], ext: vec![0; a] };
        }
        let (min, max) = bounds(&coords);
        let n = set.grid.dim();
        let h: Vec<f64> = (0..n).map(|i| set.grid.h(i)).collect();
        let tau = set.grid.tau();
        let mut rho: f64 = (0..n).map(|i| (max[i] - min[i] + 1) as f64 * h[i] / 2.0).fold(0.0, f64::max);
        if a > n {
            rho = rho.max(((max[n] - min[n] + 1) as f64 * tau).sqrt());
        }
        let pad = spec.margin * rho;
        let mut lo = Vec::with_capacity(a);
        let mut ext = Vec::with_capacity(a);
        for i in 0..n {
            let k = (pad / h[i] - 1e-9).ceil().max(0.0) as i64;
            lo.push(min[i] - k);
            ext.push((max[i] - min[i] + 1 + 2 * k) as usize);
        }
        if a > n {
            let k = (pad * pad / (2.0 * tau) - 1e-9).ceil().max(0.0) as i64;
            let future = if spec.kernel.is_causal() { 0 } else { k };
            lo.push(min[n] - k);
            ext.push((max[n] - min[n] + 1 + k + future) as usize);
        }
        Self { lo, ext }
    }

    /// Smallest box containing all the given boxes.
    pub fn hull<'a>(boxes: impl IntoIterator<Item = &'a SourceBox>) -> Option<Self> {
        let mut out: Option<Self> = None;
        for b in boxes {
            if b.len() == 0 {
                continue;
            }
            out = Some(match out {
                None => b.clone(),
                Some(o) => {
                    let lo: Vec<i64> = o.lo.iter().zip(&b.lo).map(|(x, y)| *x.min(y)).collect();
                    let ext = (0..lo.len())
                        .map(|i| ((o.lo[i] + o.ext[i] as i64).max(b.lo[i] + b.ext[i] as i64) - lo[i]) as usize)
                        .collect();
                    Self { lo, ext }
                }
            });
        }
        out
    }

    pub fn len(&self) -> usize {
        self.ext.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn axes(set: &CompactSet, spec: &CapacitySpec) -> usize {
    set.grid.dim() + usize::from(!spec.kernel.is_elliptic())
}

pub(crate) fn lattice_coords(set: &CompactSet, spec: &CapacitySpec) -> Vec<Vec<i64>> {
    let mut c = set.coordinates();
    if spec.kernel.is_elliptic() {
        for v in &mut c {
            v.pop();
        }
        c.sort();
        c.dedup();
    }
    c
}

fn bounds(coords: &[Vec<i64>]) -> (Vec<i64>, Vec<i64>) {
    let a = coords[0].len();
    let mut min = vec![i64::MAX; a];
    let mut max = vec![i64::MIN; a];
    for c in coords {
        for i in 0..a {
            min[i] = min[i].min(c[i]);
            max[i] = max[i].max(c[i]);
        }
    }
    (min, max)
}

/// Discretized convolution operator `f ↦ (K * f)(z_i)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub sources: SourceBox,
    /// Volume of one source cell.
    pub volume: f64,
    targets: Vec<Vec<i64>>,
    tab_lo: Vec<i64>,
    tab_ext: Vec<usize>,
    // last axis stored reversed so that rows run along increasing source index
    table: Vec<f64>,
    // table row of the target minus table row of the source row
    target_base: Vec<(usize, usize)>,
    row_offset: Vec<usize>,
}

impl KernelMatrix {
    pub fn new(set: &CompactSet, spec: &CapacitySpec, sources: &SourceBox) -> Result<Self> {
        let dim = set.grid.dim();
        spec.validate(dim)?;
        let a = axes(set, spec);
        if sources.lo.len() != a || sources.ext.len() != a {
            return Err(Error::DimensionMismatch { expected: a, found: sources.lo.len() });
        }
        let targets = lattice_coords(set, spec);
        let volume = if spec.kernel.is_elliptic() { set.grid.spatial_cell_volume() } else { set.grid.cell_volume() };
        if targets.is_empty() || sources.is_empty() {
            return Ok(Self {
                sources: sources.clone(),
                volume,
                targets,
                tab_lo: vec![0; a],
                tab_ext: vec![0; a],
                table: Vec::new(),
                target_base: Vec::new(),
                row_offset: Vec::new(),
            });
        }
        let (min, max) = bounds(&targets);
        let tab_lo: Vec<i64> = (0..a).map(|i| min[i] - (sources.lo[i] + sources.ext[i] as i64 - 1)).collect();
        let tab_ext: Vec<usize> = (0..a).map(|i| (max[i] - min[i]) as usize + sources.ext[i]).collect();
        let entry = EntryRule::new(set, spec);
        let mut cache: HashMap<Vec<i64>, f64> = HashMap::new();
        let len: usize = tab_ext.iter().product();
        let last = tab_ext[a - 1];
        let mut table = vec![0.0; len];
        let mut idx = vec![0usize; a];
        for flat in 0..len {
            let mut rem = flat;
            for i in (0..a).rev() {
                idx[i] = rem % tab_ext[i];
                rem /= tab_ext[i];
            }
            let d: Vec<i64> = (0..a).map(|i| tab_lo[i] + idx[i] as i64).collect();
            let key = entry.canonical(&d);
            let v = *cache.entry(key).or_insert_with(|| entry.value(&d));
            let row = flat / last;
            table[row * last + (last - 1 - idx[a - 1])] = v;
        }
        let stride = strides(&tab_ext[..a - 1]);
        let src_rows: usize = sources.ext[..a - 1].iter().product();
        let row_offset = (0..src_rows)
            .map(|r| {
                let mut rem = r;
                let mut off = 0;
                for i in (0..a - 1).rev() {
                    off += (rem % sources.ext[i]) * stride[i];
                    rem /= sources.ext[i];
                }
                off
            })
            .collect();
        let target_base = targets
            .iter()
            .map(|m| {
                let base = (0..a - 1).map(|i| (m[i] - sources.lo[i] - tab_lo[i]) as usize * stride[i]).sum();
                let r0 = last - 1 - (m[a - 1] - sources.lo[a - 1] - tab_lo[a - 1]) as usize;
                (base, r0)
            })
            .collect();
        Ok(Self { sources: sources.clone(), volume, targets, tab_lo, tab_ext, table, target_base, row_offset })
    }

    pub fn targets(&self) -> usize {
        self.targets.len()
    }

    pub fn source_len(&self) -> usize {
        self.sources.len()
    }

    /// Distinct kernel integrals held in the offset table.
    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// Entry between target `i` and the source cell at lattice coordinates `j`.
    pub fn entry(&self, i: usize, j: &[i64]) -> f64 {
        let a = self.tab_ext.len();
        let m = &self.targets[i];
        let mut flat = 0;
        for k in 0..a {
            let d = m[k] - j[k] - self.tab_lo[k];
            if d < 0 || d as usize >= self.tab_ext[k] {
                return 0.0;
            }
            let d = if k == a - 1 { self.tab_ext[k] - 1 - d as usize } else { d as usize };
            flat = flat * self.tab_ext[k] + d;
        }
        self.table[flat]
    }

    /// `out_i = Σ_j A_ij f_j`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let w = self.sources.ext.last().copied().unwrap_or(0);
        let last = self.tab_ext.last().copied().unwrap_or(0);
        for (o, &(base, r0)) in out.iter_mut().zip(&self.target_base) {
            let mut acc = 0.0;
            for (r, &off) in self.row_offset.iter().enumerate() {
                let start = (base - off) * last + r0;
                acc += dot(&self.table[start..start + w], &f[r * w..(r + 1) * w]);
            }
            *o = acc;
        }
    }

    /// `out_j = Σ_i A_ij ν_i`.
    pub fn apply_transpose(&self, nu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let w = self.sources.ext.last().copied().unwrap_or(0);
        let last = self.tab_ext.last().copied().unwrap_or(0);
        for (&c, &(base, r0)) in nu.iter().zip(&self.target_base) {
            if c == 0.0 {
                continue;
            }
            for (r, &off) in self.row_offset.iter().enumerate() {
                let start = (base - off) * last + r0;
                for (o, t) in out[r * w..(r + 1) * w].iter_mut().zip(&self.table[start..start + w]) {
                    *o += c * t;
                }
            }
        }
    }
}

fn strides(ext: &[usize]) -> Vec<usize> {
    let mut s = vec![1; ext.len()];
    for i in (0..ext.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * ext[i + 1];
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Kernel integral over the source cell centered at the origin, seen from a
/// target at integer offset `d`.
struct EntryRule {
    spec: CapacitySpec,
    h: Vec<f64>,
    tau: f64,
    isotropic: bool,
}

impl EntryRule {
    fn new(set: &CompactSet, spec: &CapacitySpec) -> Self {
        let n = set.grid.dim();
        let h: Vec<f64> = (0..n).map(|i| set.grid.h(i)).collect();
        let isotropic = h.iter().all(|v| (v - h[0]).abs() <= 1e-12 * h[0]);
        Self { spec: spec.clone(), h, tau: set.grid.tau(), isotropic }
    }

    /// Offsets with equal entries share a key: every kernel is radial in space
    /// and the Riesz kernel is even in time.
    fn canonical(&self, d: &[i64]) -> Vec<i64> {
        let n = self.h.len();
        let mut k: Vec<i64> = d.iter().map(|v| v.abs()).collect();
        if self.isotropic {
            k[..n].sort_unstable();
        }
        if d.len() > n && self.spec.kernel.is_causal() {
            k[n] = d[n];
        }
        k
    }

    fn value(&self, d: &[i64]) -> f64 {
        let n = self.h.len();
        let x: Vec<f64> = (0..n).map(|i| d[i] as f64 * self.h[i]).collect();
        let lo: Vec<f64> = self.h.iter().map(|h| -h / 2.0).collect();
        let hi: Vec<f64> = self.h.iter().map(|h| h / 2.0).collect();
        if let Some(kind) = self.spec.kernel.elliptic() {
            return elliptic_cell_integral(kind, self.spec.alpha, &x, &lo, &hi);
        }
        let kernel = self.spec.kernel.parabolic().expect("parabolic kernel");
        let z = SpaceTimePoint::new(x, d[n] as f64 * self.tau);
        cell_kernel_integral(kernel, &self.spec.potential_spec(), &z, &lo, &hi, (-self.tau / 2.0, self.tau / 2.0))
    }
}

#[cfg(test)]
mod tests {
    use super::super::CapacityKernel;
    use super::*;
    use crate::geometry::ParabolicCylinder;
    use crate::grid::GridSpec;

    fn small_set() -> CompactSet {
        let cyl = ParabolicCylinder::centered(SpaceTimePoint::new(vec![0.0, 0.0], 0.0), 1.0).unwrap();
        CompactSet::cylinder_nodes(&cyl, 0.5, 0.25).unwrap()
    }

    #[test]
    fn apply_matches_entrywise_sum() {
        for kernel in [CapacityKernel::RieszE, CapacityKernel::HeatH] {
            let set = small_set();
            let spec = CapacitySpec::new(kernel, 1.5, 2.0);
            let src = SourceBox::around(&set, &spec);
            let a = KernelMatrix::new(&set, &spec, &src).unwrap();
            let s = src.len();
            let f: Vec<f64> = (0..s).map(|j| 1.0 + (j % 7) as f64 / 7.0).collect();
            let mut out = vec![0.0; a.targets()];
            a.apply(&f, &mut out);
            let coords: Vec<Vec<i64>> = (0..s)
                .map(|mut r| {
                    let mut c = vec![0; 3];
                    for i in (0..3).rev() {
                        c[i] = src.lo[i] + (r % src.ext[i]) as i64;
                        r /= src.ext[i];
                    }
                    c
                })
                .collect();
            for i in [0, 7, a.targets() - 1] {
                let direct: f64 = coords.iter().zip(&f).map(|(c, v)| a.entry(i, c) * v).sum();
                assert!((out[i] - direct).abs() < 1e-12 * direct, "{kernel:?} {} {direct}", out[i]);
            }
            // adjointness
            let nu: Vec<f64> = (0..a.targets()).map(|i| (i % 3) as f64).collect();
            let mut u = vec![0.0; s];
            a.apply_transpose(&nu, &mut u);
            let lhs: f64 = nu.iter().zip(&out).map(|(x, y)| x * y).sum();
            let rhs: f64 = u.iter().zip(&f).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs);
        }
    }

    #[test]
    fn causal_sources_stop_at_the_set() {
        let set = small_set();
        let spec = CapacitySpec::new(CapacityKernel::HeatH, 1.5, 2.0);
        let src = SourceBox::around(&set, &spec);
        let top = set.coordinates().iter().map(|c| c[2]).max().unwrap();
        assert_eq!(src.lo[2] + src.ext[2] as i64 - 1, top);
        let sym = SourceBox::around(&set, &CapacitySpec::new(CapacityKernel::RieszE, 1.5, 2.0));
        assert!(sym.lo[2] + sym.ext[2] as i64 - 1 > top);
    }

    #[test]
    fn far_entries_approach_point_values() {
        // far from the source cell the integral is the kernel times the cell volume
        let g = GridSpec::cube(1, 0.5, 1, -0.05, 0.05, 1).unwrap();
        let set = CompactSet::new(g, vec![0]).unwrap();
        let spec = CapacitySpec::new(CapacityKernel::RieszE, 1.0, 2.0);
        let src = SourceBox { lo: vec![-40, -4], ext: vec![1, 1] };
        let a = KernelMatrix::new(&set, &spec, &src).unwrap();
        let v = a.entry(0, &[-40, -4]);
        // offset (40, 0.4): d = max(40, sqrt(0.8)) = 40, E = d^{-2}
        let point = 40f64.powi(-2) * 1.0 * 0.1;
        assert!((v / point - 1.0).abs() < 1e-3, "{v} {point}");
    }
}
