//! Lorentz norms from exact distribution functions, and their Morrey sups.

use super::{DomainBox, Morrey, NormSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::SpaceTimePoint;
use crate::grid::{GridFunction, GridSpec};
use crate::measure::interval_overlap;
use crate::overlap::{ball_box_volume, OverlapMode};
use serde::{Deserialize, Serialize};

/// Number of radii in a Morrey scan.
const MORREY_RADII: usize = 32;

/// `‖g‖_{L^{q,s}}` from values sorted by decreasing modulus and their masses:
/// `(q ∫_0^∞ (ρ^q w{|g|>ρ})^{s/q} dρ/ρ)^{1/s}`, or `sup_ρ ρ w{|g|>ρ}^{1/q}`.
pub(crate) fn lorentz_sorted(values: &[f64], masses: &[f64], q: f64, s: f64) -> f64 {
    let mut cum = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < values.len() {
        let a = values[i];
        while i < values.len() && values[i] == a {
            cum += masses[i];
            i += 1;
        }
        if cum == 0.0 || a == 0.0 {
            continue;
        }
        let next = if i < values.len() { values[i] } else { 0.0 };
        if s.is_infinite() {
            acc = f64::max(acc, a * cum.powf(1.0 / q));
        } else {
            acc += cum.powf(s / q) * (a.powf(s) - next.powf(s));
        }
    }
    if s.is_infinite() {
        acc
    } else {
        (q / s * acc).powf(1.0 / s)
    }
}

/// Fraction of spatial cell `lin` and time step `k` inside the domain box.
fn domain_fraction(g: &GridSpec, d: &Option<DomainBox>, j: usize) -> f64 {
    let Some(d) = d else { return 1.0 };
    let (k, s) = g.split(j);
    let (lo, hi) = g.spatial_bounds(s);
    let (ta, tb) = g.time_bounds(k);
    let mut f = interval_overlap(ta, tb, d.t0, d.t1) / (tb - ta);
    for i in 0..g.dim() {
        f *= interval_overlap(lo[i], hi[i], d.lo[i], d.hi[i]) / (hi[i] - lo[i]);
    }
    f
}

fn check_inputs(f: &GridFunction, spec: &NormSpec) -> Result<()> {
    spec.validate(f.grid.dim())?;
    if let Some(w) = &spec.weight {
        w.validate()?;
        if w.grid() != &f.grid {
            return Err(Error::InvalidParameter("weight lives on another grid".into()));
        }
    }
    Ok(())
}

/// Weighted Lorentz norm `‖f‖_{L^{q,s}(D, dw)}`.
pub fn lorentz_norm(f: &GridFunction, spec: &NormSpec) -> Result<f64> {
    check_inputs(f, spec)?;
    if spec.morrey != Morrey::None {
        return invalid("lorentz_norm takes an unlocalized spec; use lorentz_morrey_norm");
    }
    let g = &f.grid;
    let vol = g.cell_volume();
    let mut pairs: Vec<(f64, f64)> = (0..g.len())
        .map(|j| {
            let w = spec.weight.as_ref().map_or(1.0, |w| w.values.values[j]);
            (f.values[j].abs(), w * vol * domain_fraction(g, &spec.domain, j))
        })
        .filter(|(a, m)| *a > 0.0 && *m > 0.0)
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (v, m): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(lorentz_sorted(&v, &m, spec.q, spec.s))
}

/// Maximizer of a Lorentz–Morrey scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyScan {
    pub value: f64,
    pub center: SpaceTimePoint,
    pub radius: f64,
}

pub fn lorentz_morrey_norm(f: &GridFunction, spec: &NormSpec) -> Result<f64> {
    Ok(lorentz_morrey_scan(f, spec)?.value)
}

/// Lorentz–Morrey norm approximated over all cell centers of the domain and
/// 32 log-spaced radii reaching the domain diameter; cylinders and balls are
/// intersected with cells exactly.
pub fn lorentz_morrey_scan(f: &GridFunction, spec: &NormSpec) -> Result<MorreyScan> {
    check_inputs(f, spec)?;
    if spec.weight.is_some() {
        return invalid("Lorentz-Morrey norms are unweighted");
    }
    let g = &f.grid;
    let n = g.dim();
    let nf = n as f64;
    let (spatial, expo) = match spec.morrey {
        Morrey::None => return invalid("lorentz_morrey_scan needs a calorie or spatial localization"),
        Morrey::Calorie { kappa } => (false, (kappa - nf - 2.0) / spec.q),
        Morrey::Spatial { theta } => (true, (theta - nf) / spec.q),
    };
    let m = g.spatial_len();
    let dom = spec.domain.clone().unwrap_or_else(|| DomainBox {
        lo: g.corner.clone(),
        hi: (0..n).map(|i| g.corner[i] + g.sides[i]).collect(),
        t0: g.t0,
        t1: g.t1,
    });
    // spatial cells clipped to the domain
    let boxes: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..m)
        .map(|s| {
            let (lo, hi) = g.spatial_bounds(s);
            let lo: Vec<f64> = (0..n).map(|i| lo[i].max(dom.lo[i])).collect();
            let hi: Vec<f64> = (0..n).map(|i| hi[i].min(dom.hi[i])).collect();
            (0..n).all(|i| lo[i] < hi[i]).then_some((lo, hi))
        })
        .collect();
    let steps: Vec<(f64, f64)> = (0..g.steps)
        .map(|k| {
            let (a, b) = g.time_bounds(k);
            (a.max(dom.t0), b.min(dom.t1))
        })
        .collect();
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..g.len())
            .filter(|&j| {
                let (k, s) = g.split(j);
                f.values[j] != 0.0 && boxes[s].is_some() && steps[k].0 < steps[k].1
            })
            .collect();
        o.sort_by(|a, b| f.values[*b].abs().partial_cmp(&f.values[*a].abs()).unwrap());
        o
    };
    let values: Vec<f64> = order.iter().map(|&j| f.values[j].abs()).collect();
    let diag = (0..n).map(|i| (dom.hi[i] - dom.lo[i]).powi(2)).sum::<f64>().sqrt();
    let r_hi = if spatial { diag } else { diag.max((2.0 * (dom.t1 - dom.t0)).sqrt()) } * (1.0 + 1e-9);
    let hmin = (0..n).map(|i| g.h(i)).fold(f64::INFINITY, f64::min);
    let r_lo = if spatial { hmin } else { hmin.min((2.0 * g.tau()).sqrt()) } * 0.5;
    let radii: Vec<f64> = (0..MORREY_RADII)
        .map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / (MORREY_RADII - 1) as f64))
        .collect();

    let centers: Vec<SpaceTimePoint> = if spatial {
        (0..m).filter(|s| boxes[*s].is_some()).map(|s| SpaceTimePoint::new(g.spatial_center(s), 0.0)).collect()
    } else {
        (0..g.len())
            .filter(|&j| {
                let (k, s) = g.split(j);
                boxes[s].is_some() && steps[k].0 < steps[k].1
            })
            .map(|j| g.center(j))
            .collect()
    };
    let mut best = MorreyScan { value: 0.0, center: SpaceTimePoint::origin(n), radius: r_hi };
    if order.is_empty() {
        return Ok(best);
    }
    let mut sov = vec![0.0; m];
    let mut tw = vec![0.0; g.steps];
    let mut masses = vec![0.0; order.len()];
    for c in &centers {
        for &r in &radii {
            for (s, b) in boxes.iter().enumerate() {
                sov[s] = match b {
                    Some((lo, hi)) => ball_box_volume(&c.x, r, lo, hi, OverlapMode::Exact),
                    None => 0.0,
                };
            }
            for (k, &(a, b)) in steps.iter().enumerate() {
                tw[k] = if spatial { (b - a).max(0.0) } else { interval_overlap(a, b, c.t - r * r / 2.0, c.t + r * r / 2.0) };
            }
            for (slot, &j) in masses.iter_mut().zip(&order) {
                let (k, s) = g.split(j);
                *slot = sov[s] * tw[k];
            }
            let v = r.powf(expo) * lorentz_sorted(&values, &masses, spec.q, spec.s);
            if v > best.value {
                best = MorreyScan { value: v, center: c.clone(), radius: r };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::Weight;
    use proptest::prelude::*;

    fn grid2() -> GridSpec {
        GridSpec::cube(2, 1.0, 4, 0.0, 1.0, 4).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let g = grid2();
        let vol = g.cell_volume();
        let ind: Vec<f64> = (0..g.len()).map(|j| if j % 7 == 0 { 1.0 } else { 0.0 }).collect();
        let e = ind.iter().sum::<f64>() * vol;
        let f = GridFunction::new(g, ind).unwrap();
        let weak = lorentz_norm(&f, &NormSpec::lorentz(2.0, f64::INFINITY)).unwrap();
        assert!((weak - e.sqrt()).abs() < 1e-14);
        let v = lorentz_norm(&f, &NormSpec::lorentz(2.0, 1.0)).unwrap();
        assert!((v - 2.0 * e.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weak_norm_of_pi_over_16() {
        // |E| = π/16 carried by a single cell of that volume
        let side = (std::f64::consts::PI / 16.0).sqrt();
        let g = GridSpec::new(vec![0.0], vec![side], 0.0, side, vec![1], 1).unwrap();
        let f = GridFunction::new(g, vec![1.0]).unwrap();
        let v = lorentz_norm(&f, &NormSpec::lorentz(2.0, f64::INFINITY)).unwrap();
        assert!((v - 0.44311).abs() < 1e-5);
    }

    #[test]
    fn unit_indicator_q2_s1() {
        let g = GridSpec::cube(1, 0.5, 2, 0.0, 1.0, 1).unwrap();
        let f = GridFunction::new(g, vec![1.0, 1.0]).unwrap();
        assert!((lorentz_norm(&f, &NormSpec::lorentz(2.0, 1.0)).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn domain_restriction() {
        let g = GridSpec::cube(1, 1.0, 2, 0.0, 1.0, 1).unwrap();
        let f = GridFunction::new(g, vec![1.0, 3.0]).unwrap();
        let d = DomainBox { lo: vec![-1.0], hi: vec![0.5], t0: 0.0, t1: 1.0 };
        let v = lorentz_norm(&f, &NormSpec::lorentz(1.0, 1.0).with_domain(d)).unwrap();
        assert!((v - (1.0 + 1.5)).abs() < 1e-14);
    }

    #[test]
    fn calorie_full_dimension_is_plain_lorentz() {
        let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 4).unwrap();
        let f = GridFunction::new(g, (0..16).map(|j| ((j * 5) % 7) as f64).collect()).unwrap();
        for (q, s) in [(2.0, 2.0), (1.5, 3.0), (2.0, f64::INFINITY)] {
            let a = lorentz_norm(&f, &NormSpec::lorentz(q, s)).unwrap();
            let b = lorentz_morrey_norm(&f, &NormSpec::calorie(q, s, 3.0)).unwrap();
            assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
            let c = lorentz_morrey_norm(&f, &NormSpec::spatial(q, s, 1.0)).unwrap();
            assert!((a - c).abs() < 1e-12 * a, "{a} vs {c}");
        }
    }

    #[test]
    fn calorie_indicator_of_cylinder_matches_scan() {
        // N = 1: Q̃_{ρ0}(0) = (-1,1) × [-1/2, 1/2) is a union of cells
        let g = GridSpec::new(vec![-2.0], vec![4.0], -1.0, 1.0, vec![8], 8).unwrap();
        let f = GridFunction::from_fn(g.clone(), |z| if z.x[0].abs() < 1.0 && z.t.abs() < 0.5 { 1.0 } else { 0.0 });
        let (q, kappa) = (2.0, 2.0);
        let got = lorentz_morrey_scan(&f, &NormSpec::calorie(q, q, kappa)).unwrap();
        let mut oracle: f64 = 0.0;
        for c in g.centers() {
            for i in 0..4000 {
                let r = 0.01 * (600.0f64).powf(i as f64 / 3999.0);
                let sx = interval_overlap(c.x[0] - r, c.x[0] + r, -1.0, 1.0);
                let st = interval_overlap(c.t - r * r / 2.0, c.t + r * r / 2.0, -0.5, 0.5);
                oracle = oracle.max(r.powf((kappa - 3.0) / q) * (sx * st).sqrt());
            }
        }
        assert!(got.value <= oracle * (1.0 + 1e-9), "{} vs {oracle}", got.value);
        assert!(got.value >= 0.97 * oracle, "{} vs {oracle}", got.value);
    }

    #[test]
    fn zero_and_guards() {
        let g = grid2();
        let f = GridFunction::zeros(g.clone());
        assert_eq!(lorentz_morrey_norm(&f, &NormSpec::calorie(2.0, 2.0, 3.0)).unwrap(), 0.0);
        assert!(lorentz_morrey_norm(&f, &NormSpec::calorie(2.0, 2.0, 3.0).with_weight(Weight::uniform(&g))).is_err());
        assert!(lorentz_norm(&f, &NormSpec::calorie(2.0, 2.0, 3.0)).is_err());
        assert!(lorentz_morrey_norm(&f, &NormSpec::calorie(2.0, 2.0, 5.0)).is_err());
    }

    proptest! {
        #[test]
        fn s_equal_q_is_lq(vals in proptest::collection::vec(-3.0f64..3.0, 16), w in proptest::collection::vec(0.1f64..5.0, 16), q in 0.5f64..4.0) {
            let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 4).unwrap();
            let wt = Weight::new(GridFunction::new(g.clone(), w.clone()).unwrap()).unwrap();
            let f = GridFunction::new(g.clone(), vals.clone()).unwrap();
            let got = lorentz_norm(&f, &NormSpec::lorentz(q, q).with_weight(wt)).unwrap();
            let want = vals.iter().zip(&w).map(|(v, w)| v.abs().powf(q) * w * g.cell_volume()).sum::<f64>().powf(1.0 / q);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }

        #[test]
        fn indicator_closed_form(mask in proptest::collection::vec(any::<bool>(), 16), q in 0.5f64..4.0, s in 0.5f64..6.0) {
            let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 4).unwrap();
            let f = GridFunction::new(g.clone(), mask.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()).unwrap();
            let e = f.values.iter().sum::<f64>() * g.cell_volume();
            let got = lorentz_norm(&f, &NormSpec::lorentz(q, s)).unwrap();
            let want = (q / s).powf(1.0 / s) * e.powf(1.0 / q);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }

        #[test]
        fn monotone(vals in proptest::collection::vec(0.0f64..3.0, 16), bump in proptest::collection::vec(0.0f64..1.0, 16), q in 0.5f64..4.0, s in 0.5f64..6.0) {
            let g = GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 4).unwrap();
            let f = GridFunction::new(g.clone(), vals.clone()).unwrap();
            let h = GridFunction::new(g, vals.iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
            let a = lorentz_norm(&f, &NormSpec::lorentz(q, s)).unwrap();
            let b = lorentz_norm(&h, &NormSpec::lorentz(q, s)).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
