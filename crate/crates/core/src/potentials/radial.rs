//! Integrals and suprema of radial mass profiles.
//!
//! Every potential in the crate reduces to `∫ (m(ρ) ρ^{-s})^γ ω(ρ) dρ/ρ` or to a
//! supremum of `m(ρ) ρ^{-s}`, where `m(ρ)` is the mass of a ball or cylinder of
//! radius `ρ` around the evaluation point. Atoms make `m` a step function whose
//! pieces are integrated in closed form; a density adds a smooth part that is
//! closed form near the origin (inside one cell) and beyond full enclosure, and
//! is integrated with composite Gauss–Legendre in `log ρ` in between.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

const GL_ORDER: usize = 8;

fn gl_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(GL_ORDER).unwrap());
        let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    })
}

/// Smooth part of a mass profile.
pub(crate) struct SmoothPart<'a> {
    /// Mass of the radius-`ρ` set.
    pub mass: Box<dyn Fn(f64) -> f64 + 'a>,
    /// Below this radius the smooth part vanishes (unless `near` says otherwise).
    pub rho_in: f64,
    /// At and beyond this radius the smooth part equals `total`.
    pub rho_out: f64,
    pub total: f64,
    /// `m(ρ) = c ρ^k` on `(0, rho0]`.
    pub near: Option<(f64, f64, f64)>,
    /// Radii where the mass is not smooth.
    pub kinks: Vec<f64>,
}

/// Radii at which a ball around `x` starts touching the given axis-aligned
/// planes, edges and corners. Edges and corners are skipped once their count
/// would exceed `cap`.
pub(crate) fn face_kinks(x: &[f64], planes: &[Vec<f64>], cap: usize) -> Vec<f64> {
    let offs: Vec<Vec<f64>> = planes.iter().zip(x).map(|(ps, xi)| ps.iter().map(|p| (xi - p).abs()).collect()).collect();
    let mut out: Vec<f64> = offs.iter().flatten().copied().collect();
    let combos = offs.iter().map(|o| o.len() + 1).try_fold(1usize, |a, b| a.checked_mul(b));
    if offs.len() > 1 && combos.is_some_and(|c| c <= cap) {
        let mut sq = vec![0.0];
        for o in &offs {
            sq = sq.iter().flat_map(|a| std::iter::once(*a).chain(o.iter().map(move |d| a + d * d))).collect();
        }
        out.extend(sq.into_iter().map(f64::sqrt));
    }
    out
}

/// Radii at which the centered time window around `t` reaches the given times.
pub(crate) fn time_kinks(t: f64, faces: &[f64]) -> Vec<f64> {
    faces.iter().map(|f| (2.0 * (t - f).abs()).sqrt()).collect()
}

/// Radial mass profile around one evaluation point.
pub(crate) struct MassProfile<'a> {
    dists: Vec<f64>,
    cum: Vec<f64>,
    smooth: Option<SmoothPart<'a>>,
}

impl<'a> MassProfile<'a> {
    pub fn new(mut atoms: Vec<(f64, f64)>, smooth: Option<SmoothPart<'a>>) -> Self {
        atoms.retain(|a| a.1 != 0.0);
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut acc = 0.0;
        let cum = atoms.iter().map(|a| {
            acc += a.1;
            acc
        });
        let cum: Vec<f64> = cum.collect();
        Self { dists: atoms.iter().map(|a| a.0).collect(), cum, smooth }
    }

    /// Atom mass at distance `≤ r`.
    fn atoms_le(&self, r: f64) -> f64 {
        let n = self.dists.partition_point(|d| *d <= r);
        if n == 0 {
            0.0
        } else {
            self.cum[n - 1]
        }
    }

    /// Atom mass at distance `< r`.
    fn atoms_lt(&self, r: f64) -> f64 {
        let n = self.dists.partition_point(|d| *d < r);
        if n == 0 {
            0.0
        } else {
            self.cum[n - 1]
        }
    }

    fn smooth_at(&self, r: f64) -> f64 {
        match &self.smooth {
            None => 0.0,
            Some(s) => {
                if let Some((r0, c, k)) = s.near {
                    if r <= r0 {
                        return c * r.powf(k);
                    }
                }
                if r <= s.rho_in {
                    0.0
                } else if r >= s.rho_out {
                    s.total
                } else {
                    (s.mass)(r)
                }
            }
        }
    }

    /// Mass of the open radius-`r` set.
    pub fn mass_lt(&self, r: f64) -> f64 {
        self.atoms_lt(r) + self.smooth_at(r)
    }

    fn breakpoints(&self, upper: f64, extra: f64) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.dists.iter().copied());
        if let Some(s) = &self.smooth {
            b.push(s.rho_in);
            b.push(s.rho_out);
            if let Some((r0, _, _)) = s.near {
                b.push(r0);
            }
            b.extend(s.kinks.iter().copied().filter(|k| *k > s.rho_in && *k < s.rho_out));
        }
        b.push(extra);
        b.push(upper);
        b.retain(|v| v.is_finite() && *v >= 0.0 && *v <= upper);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        if upper.is_infinite() {
            b.push(f64::INFINITY);
        }
        b
    }

    /// Shape of the smooth part on `(a, b)`.
    fn smooth_shape(&self, a: f64, b: f64) -> Shape {
        match &self.smooth {
            None => Shape::Const(0.0),
            Some(s) => {
                if let Some((r0, c, k)) = s.near {
                    if b <= r0 {
                        return Shape::Power(c, k);
                    }
                }
                if b <= s.rho_in {
                    Shape::Const(0.0)
                } else if a >= s.rho_out {
                    Shape::Const(s.total)
                } else {
                    Shape::Varying
                }
            }
        }
    }
}

enum Shape {
    Const(f64),
    Power(f64, f64),
    Varying,
}

/// Radial weight `ω(ρ)`: `below` for `ρ < R`, `above (ρ/R)^{-δ}` for `ρ > R`,
/// plus `jump (m(R) R^{-s})^γ` for a point mass at `R`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadialWeight {
    pub r: f64,
    pub delta: f64,
    pub below: f64,
    pub above: f64,
    pub jump: f64,
}

impl RadialWeight {
    /// `min{1, (ρ/R)^{-δ}}`, or truncation at `R` when `δ = 0`.
    pub fn potential(r: f64, delta: f64) -> Self {
        let above = if delta > 0.0 || r.is_infinite() { 1.0 } else { 0.0 };
        Self { r, delta, below: 1.0, above, jump: 0.0 }
    }

    /// Largest radius with nonzero weight.
    pub fn upper(&self) -> f64 {
        if self.above == 0.0 {
            self.r
        } else {
            f64::INFINITY
        }
    }

    fn at(&self, rho: f64) -> f64 {
        if rho < self.r {
            self.below
        } else if self.above == 0.0 {
            0.0
        } else {
            self.above * (rho / self.r).powf(-self.delta)
        }
    }

    /// `∫_a^b ρ^e ω(ρ) dρ/ρ`.
    fn power_integral(&self, e: f64, a: f64, b: f64) -> f64 {
        let mut v = 0.0;
        let mid = b.min(self.r);
        if mid > a && self.below != 0.0 {
            v += self.below * pow_int(e, a, mid);
        }
        let lo = a.max(self.r);
        if b > lo && self.above != 0.0 {
            v += self.above * self.r.powf(self.delta) * pow_int(e - self.delta, lo, b);
        }
        v
    }
}

/// `∫_a^b ρ^c dρ/ρ` for `0 ≤ a < b ≤ ∞`.
pub(crate) fn pow_int(c: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if b.is_infinite() {
        return if c < 0.0 && a > 0.0 { -a.powf(c) / c } else { f64::INFINITY };
    }
    if a == 0.0 {
        return if c > 0.0 { b.powf(c) / c } else { f64::INFINITY };
    }
    let l = (b / a).ln();
    let x = c * l;
    let rel = if x.abs() < 1e-12 { 1.0 + 0.5 * x } else { x.exp_m1() / x };
    a.powf(c) * l * rel
}

#[inline]
fn powg(x: f64, g: f64) -> f64 {
    if g == 1.0 {
        x
    } else {
        x.powf(g)
    }
}

/// `∫_0^∞ (m(ρ) ρ^{-s})^γ ω(ρ) dρ/ρ`; `+∞` when the integrand is not integrable.
pub(crate) fn integrate(profile: &MassProfile, s: f64, gamma: f64, w: &RadialWeight, points_per_decade: usize) -> f64 {
    let upper = w.upper();
    let extra = if w.r.is_finite() { w.r } else { 0.0 };
    let bps = profile.breakpoints(upper, extra);
    let mut total = 0.0;
    for win in bps.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        let atoms = profile.atoms_le(a);
        let piece = match profile.smooth_shape(a, b) {
            Shape::Const(d) => {
                let m = atoms + d;
                if m == 0.0 {
                    0.0
                } else if a == 0.0 {
                    return f64::INFINITY;
                } else {
                    powg(m, gamma) * w.power_integral(-s * gamma, a, b)
                }
            }
            Shape::Power(c, k) if atoms == 0.0 => {
                if c == 0.0 {
                    0.0
                } else {
                    powg(c, gamma) * w.power_integral((k - s) * gamma, a, b)
                }
            }
            _ => {
                if a == 0.0 {
                    return f64::INFINITY;
                }
                log_gl(a, b, points_per_decade, |r| {
                    let m = atoms + profile.smooth_at(r);
                    powg(m * r.powf(-s), gamma) * w.at(r)
                })
            }
        };
        total += piece;
        if !total.is_finite() {
            return f64::INFINITY;
        }
    }
    if w.jump != 0.0 && w.r.is_finite() {
        let m = profile.mass_lt(w.r);
        total += w.jump * powg(m * w.r.powf(-s), gamma);
    }
    total
}

/// Composite Gauss–Legendre of `∫_a^b f(ρ) dρ/ρ` in the variable `log ρ`.
pub(crate) fn log_gl(a: f64, b: f64, points_per_decade: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let panels_per_decade = (points_per_decade as f64 / GL_ORDER as f64).max(1.0);
    let panels = (((lb - la) / std::f64::consts::LN_10) * panels_per_decade).ceil().max(1.0) as usize;
    let width = (lb - la) / panels as f64;
    let nodes = gl_nodes();
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = la + (p as f64 + 0.5) * width;
        for (x, wgt) in nodes {
            sum += wgt * f((mid + 0.5 * width * x).exp());
        }
    }
    sum * 0.5 * width
}

/// `sup_{0<ρ<R} m(ρ) ρ^{-s}` over breakpoint limits and log-grid nodes.
pub(crate) fn supremum(profile: &MassProfile, s: f64, r: f64, points_per_decade: usize) -> f64 {
    let bps = profile.breakpoints(r, 0.0);
    let mut best = 0.0f64;
    let mut consider = |rho: f64, m: f64| {
        if rho > 0.0 && rho < r && m > 0.0 {
            best = best.max(m * rho.powf(-s));
        }
    };
    for win in bps.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        let atoms = profile.atoms_le(a);
        if a == 0.0 && atoms > 0.0 && s > 0.0 {
            return f64::INFINITY;
        }
        match profile.smooth_shape(a, b) {
            Shape::Const(d) => {
                // decreasing in ρ: the right limit at `a` dominates
                if s >= 0.0 {
                    consider(a, atoms + d);
                } else if b.is_finite() {
                    consider(b.min(r) * (1.0 - 1e-15), atoms + d);
                }
            }
            Shape::Power(c, k) if atoms == 0.0 => {
                let e = k - s;
                let rho = if e >= 0.0 { b } else { a };
                consider(rho.min(r * (1.0 - 1e-15)), c * rho.powf(k));
            }
            _ => {
                let (la, lb) = (a.ln(), b.min(r).ln());
                let n = (((lb - la) / std::f64::consts::LN_10) * points_per_decade as f64).ceil().max(2.0) as usize;
                for i in 0..=n {
                    let rho = (la + (lb - la) * i as f64 / n as f64).exp();
                    let rho = if i == 0 { a } else { rho };
                    consider(rho, atoms + profile.smooth_at(rho));
                }
            }
        }
    }
    if r.is_finite() {
        consider(r * (1.0 - 1e-15), profile.mass_lt(r));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integrals() {
        assert!((pow_int(-2.0, 1.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        assert!((pow_int(2.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((pow_int(0.0, 1.0, std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert!(pow_int(0.0, 0.0, 1.0).is_infinite());
        assert!((pow_int(-1.0, 1.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_profile_closed_form() {
        let p = MassProfile::new(vec![(1.0, 1.0), (2.0, 3.0)], None);
        let w = RadialWeight::potential(f64::INFINITY, 0.0);
        // ∫_1^2 ρ^{-3} + ∫_2^∞ 4 ρ^{-3}
        let exact = 0.5 * (1.0 - 0.25) + 4.0 * 0.5 * 0.25;
        assert!((integrate(&p, 2.0, 1.0, &w, 64) - exact).abs() < 1e-15);
        assert!((supremum(&p, 2.0, f64::INFINITY, 64) - 1.0).abs() < 1e-15);
        let t = RadialWeight::potential(1.5, 0.0);
        assert!((integrate(&p, 2.0, 1.0, &t, 64) - 0.5 * (1.0 - 1.0 / 2.25)).abs() < 1e-15);
    }

    #[test]
    fn smooth_profile_matches_closed_form() {
        // m(ρ) = ρ^3 on (0,1), constant 1 beyond: ∫_0^1 ρ^{3-2} dρ/ρ + ∫_1^∞ ρ^{-2} dρ/ρ = 1 + 1/2
        let sm = SmoothPart { mass: Box::new(|r: f64| r.powi(3)), rho_in: 0.0, rho_out: 1.0, total: 1.0, near: Some((1e-3, 1.0, 3.0)), kinks: Vec::new() };
        let p = MassProfile::new(vec![], Some(sm));
        let w = RadialWeight::potential(f64::INFINITY, 0.0);
        let v = integrate(&p, 2.0, 1.0, &w, 64);
        assert!((v - 1.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn decay_weight_tail() {
        // unit atom at distance 1, s = 2, R = 2, δ = 1:
        // ∫_1^2 ρ^{-2} dρ/ρ + 2 ∫_2^∞ ρ^{-3} dρ/ρ
        let p = MassProfile::new(vec![(1.0, 1.0)], None);
        let w = RadialWeight::potential(2.0, 1.0);
        let exact = 0.5 * (1.0 - 0.25) + 2.0 * (2f64.powi(-3) / 3.0);
        assert!((integrate(&p, 2.0, 1.0, &w, 64) - exact).abs() < 1e-15);
    }

    #[test]
    fn atom_at_center_diverges() {
        let p = MassProfile::new(vec![(0.0, 1.0)], None);
        let w = RadialWeight::potential(f64::INFINITY, 0.0);
        assert!(integrate(&p, 2.0, 1.0, &w, 64).is_infinite());
        assert!(supremum(&p, 2.0, f64::INFINITY, 64).is_infinite());
    }
}
