//! Fixed-point constructions: the potential iteration `u ↦ K I[u^q] + f`,
//! Lane–Emden problems `u_t - Δu ± |u|^{q-1}u = μ` and the Riccati problem
//! `u_t - Δu = |∇u|^q + μ`, all on one finite-difference box.

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::heat::{march, stability_limit, Absorption, Domain, HeatProblem, Scheme};
use crate::heat::{gradient_ratios, ratio};
use crate::measure::DiscreteMeasure;
use crate::norms::{lorentz_norm, NormSpec};
use crate::potentials::{LatticePotential, PotentialSpec};
use crate::report::{Num, Samples, VerificationReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    Potential,
    LaneEmdenAbsorption,
    LaneEmdenSource,
    Riccati,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub q: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
    pub mode: IterationMode,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Values above this count as blow-up; `None` is `1e8` times the size of
    /// the linear part.
    #[serde(default)]
    pub ceiling: Option<f64>,
    /// Weight of the new iterate; `1` is plain Picard.
    #[serde(default = "one")]
    pub damping: f64,
}

fn one() -> f64 {
    1.0
}

fn default_iters() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-6
}

impl IterationConfig {
    pub fn new(mode: IterationMode, q: f64) -> Self {
        Self { q, k: 1.0, mode, max_iters: default_iters(), tol: default_tol(), ceiling: None, damping: 1.0 }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_ceiling(mut self, c: f64) -> Self {
        self.ceiling = Some(c);
        self
    }

    /// `q' = q/(q-1)`.
    pub fn q_prime(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.q.is_finite()) {
            return invalid(format!("q = {} must exceed 1", self.q));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return invalid(format!("K = {} must be positive", self.k));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return invalid("tolerance and iteration budget must be positive");
        }
        if let Some(c) = self.ceiling {
            if !(c > 0.0) {
                return invalid(format!("divergence ceiling {c} must be positive"));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return invalid(format!("damping {} must lie in (0, 1]", self.damping));
        }
        Ok(())
    }

    fn ceiling_for(&self, scale: f64) -> f64 {
        self.ceiling.unwrap_or(1e8 * scale.max(f64::MIN_POSITIVE))
    }

    fn require_mode(&self, allowed: &[IterationMode]) -> Result<()> {
        if allowed.contains(&self.mode) {
            Ok(())
        } else {
            invalid(format!("iteration mode {:?} does not fit this solver", self.mode))
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// How an iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    Diverged,
    Exhausted,
}

impl Outcome {
    fn status(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::Diverged => "diverged",
            Outcome::Exhausted => "not converged",
        }
    }
}

/// Picard iteration `u_0 = f`, `u_{n+1} = K I[u_n^q] + f` of a nonnegative
/// cell density. Every iterate is compared with
/// `(K q 2^{q-1}/(q-1)) I[f^q] + f` and with its predecessor.
pub fn picard_potential_iteration(f: &GridFunction, spec: &PotentialSpec, cfg: &IterationConfig) -> Result<(GridFunction, VerificationReport)> {
    cfg.validate()?;
    cfg.require_mode(&[IterationMode::Potential])?;
    if f.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::SignedMeasure("the Picard datum must be finite and nonnegative".into()));
    }
    let lattice = LatticePotential::new(&f.grid, spec)?;
    let q = cfg.q;
    let fq: Vec<f64> = f.values.iter().map(|v| v.powf(q)).collect();
    let factor = cfg.k * q * 2f64.powf(q - 1.0) / (q - 1.0);
    let bound: Vec<f64> = lattice.apply(&fq)?.iter().zip(&f.values).map(|(i, v)| factor * i + v).collect();
    let ceiling = cfg.ceiling_for(sup(&f.values));
    let mut u = f.values.clone();
    let mut samples = Samples::new(&["iteration", "sup_u", "step", "bound_excess"]);
    let mut violations = 0usize;
    let mut first_violation = None;
    let mut decreases = 0usize;
    let mut worst_bound_ratio = 0.0f64;
    let mut outcome = Outcome::Exhausted;
    let mut iterations = 0;
    let mut record = |n: usize, u: &[f64], step: f64, violations: &mut usize, worst: &mut f64, samples: &mut Samples| {
        let scale = 1.0 + sup(&bound);
        let mut excess = f64::NEG_INFINITY;
        for (a, b) in u.iter().zip(&bound) {
            excess = excess.max(a - b);
            if *a > b + 1e-12 * scale {
                *violations += 1;
                if first_violation.is_none() {
                    first_violation = Some(n);
                }
            }
            if *b > 0.0 {
                *worst = worst.max(a / b);
            }
        }
        samples.push(&[n as f64, sup(u), step, excess]);
    };
    record(0, &u, 0.0, &mut violations, &mut worst_bound_ratio, &mut samples);
    for n in 1..=cfg.max_iters {
        iterations = n;
        let powered: Vec<f64> = u.iter().map(|v| v.powf(q)).collect();
        if powered.iter().any(|v| !v.is_finite()) {
            outcome = Outcome::Diverged;
            break;
        }
        let pot = lattice.apply(&powered)?;
        let next: Vec<f64> =
            pot.iter().zip(&f.values).zip(&u).map(|((i, fv), old)| (1.0 - cfg.damping) * old + cfg.damping * (cfg.k * i + fv)).collect();
        let scale = 1.0 + sup(&u);
        if next.iter().zip(&u).any(|(a, b)| *a < b - 1e-12 * scale) {
            decreases += 1;
        }
        let step = sup_diff(&next, &u);
        u = next;
        if u.iter().any(|v| !v.is_finite() || *v > ceiling) {
            outcome = Outcome::Diverged;
            samples.push(&[n as f64, sup(&u), step, f64::NAN]);
            break;
        }
        record(n, &u, step, &mut violations, &mut worst_bound_ratio, &mut samples);
        if step < cfg.tol * (1.0 + sup(&u)) {
            outcome = Outcome::Converged;
            break;
        }
    }
    let mut report = VerificationReport::new("picard_potential")
        .param("q", Num(q))
        .param("K", Num(cfg.k))
        .param("spec", spec)
        .param("ceiling", Num(ceiling));
    report.samples = samples;
    report.set_constant("iterations", iterations as f64);
    report.set_constant("sup_u", sup(&u));
    report.set_constant("bound_violations", violations as f64);
    report.set_constant("max_bound_ratio", worst_bound_ratio);
    report.set_constant("monotonicity_violations", decreases as f64);
    if let Some(n) = first_violation {
        report.set_constant("first_bound_violation", n as f64);
    }
    if outcome == Outcome::Diverged {
        report.set_constant("first_divergent_iterate", iterations as f64);
    }
    report.worst_ratio = worst_bound_ratio.into();
    let pass = outcome == Outcome::Converged && violations == 0 && decreases == 0;
    let status = if outcome == Outcome::Converged && !pass { "bound violated" } else { outcome.status() };
    let u = GridFunction::new(f.grid.clone(), u)?;
    Ok((u, report.finish(pass, status)))
}

fn scheme_for(grid: &GridSpec) -> Scheme {
    if grid.tau() <= stability_limit(grid) {
        Scheme::Explicit
    } else {
        Scheme::CrankNicolson
    }
}

/// Lane–Emden problem on the Dirichlet box with the power term advanced
/// semi-implicitly inside the time march. Absorption results are compared
/// with the linear solve on the same grid.
pub fn lane_emden_solve(mu: &DiscreteMeasure, sigma: &DiscreteMeasure, cfg: &IterationConfig, grid: &GridSpec) -> Result<(GridFunction, VerificationReport)> {
    cfg.validate()?;
    cfg.require_mode(&[IterationMode::LaneEmdenAbsorption, IterationMode::LaneEmdenSource])?;
    let source = cfg.mode == IterationMode::LaneEmdenSource;
    let pr = HeatProblem::new(mu.clone(), sigma.clone(), Domain::DirichletBox, grid.clone(), scheme_for(grid))?;
    let linear = march(&pr, None, None)?.u;
    let ceiling = cfg.ceiling_for(linear.sup_abs());
    let run = march(&pr, None, Some(Absorption { q: cfg.q, source, ceiling }))?;
    let u = run.u;
    let mut report = VerificationReport::new(if source { "lane_emden_source" } else { "lane_emden_absorption" })
        .param("q", Num(cfg.q))
        .param("scheme", pr.scheme)
        .param("ceiling", Num(ceiling));
    let m = grid.spatial_len();
    let mut samples = Samples::new(&["t", "sup_u", "sup_linear"]);
    for k in 0..grid.steps {
        samples.push(&[grid.time_center(k), sup(&u.values[k * m..(k + 1) * m]), sup(&linear.values[k * m..(k + 1) * m])]);
    }
    report.samples = samples;
    report.set_constant("sup_u", u.sup_abs());
    report.set_constant("sup_linear", linear.sup_abs());
    if let Some(k) = run.blown_up_at {
        report.set_constant("blow_up_step", k as f64);
        report.set_constant("blow_up_time", grid.time_center(k));
        return Ok((u, report.finish(false, "diverged")));
    }
    if source {
        return Ok((u, report.finish(true, "pass")));
    }
    let nonnegative = mu.is_nonnegative() && sigma.is_nonnegative();
    let scale = 1e-12 * (1.0 + linear.sup_abs());
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for (a, b) in u.values.iter().zip(&linear.values) {
        if nonnegative && (*a < -scale || *a > b + scale) {
            violations += 1;
        }
        if *b > 0.0 {
            worst = worst.max(a / b);
        }
    }
    report.set_constant("comparison_violations", violations as f64);
    report.set_constant("max_ratio_to_linear", worst);
    report.worst_ratio = worst.into();
    let pass = violations == 0;
    Ok((u, report.finish(pass, if pass { "pass" } else { "comparison violated" })))
}

/// `|∇u|` at every node with the zero boundary value imposed by odd
/// reflection across the walls.
fn gradient_with_walls(u: &[f64], g: &GridSpec) -> Vec<f64> {
    let n = g.dim();
    let m = g.spatial_len();
    let mut stride = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * g.cells[i + 1];
    }
    (0..u.len())
        .map(|f| {
            let s = f % m;
            let mut sq = 0.0;
            for a in 0..n {
                let j = (s / stride[a]) % g.cells[a];
                let lo = if j == 0 { -u[f] } else { u[f - stride[a]] };
                let hi = if j + 1 == g.cells[a] { -u[f] } else { u[f + stride[a]] };
                let d = (hi - lo) / (2.0 * g.h(a));
                sq += d * d;
            }
            sq.sqrt()
        })
        .collect()
}

/// Picard iteration `u_{n+1} = S(|∇u_n|^q + μ, σ)` where `S` is the Dirichlet
/// heat solve on `grid`. Reports `Λ̂ = max |∇u| / I_1[|ω|]` away from atoms
/// and the ratio of `L^{(q-1)(N+2),∞}` norms of `|∇u|` and `I_1[|ω|]`, with
/// `ω = μ + σ⊗δ`.
pub fn riccati_solve(mu: &DiscreteMeasure, sigma: &DiscreteMeasure, cfg: &IterationConfig, grid: &GridSpec) -> Result<(GridFunction, VerificationReport)> {
    cfg.validate()?;
    cfg.require_mode(&[IterationMode::Riccati])?;
    let pr = HeatProblem::new(mu.clone(), sigma.clone(), Domain::DirichletBox, grid.clone(), scheme_for(grid))?;
    let q = cfg.q;
    let mut u = march(&pr, None, None)?.u.values;
    let ceiling = cfg.ceiling_for(sup(&u));
    let mut samples = Samples::new(&["iteration", "sup_u", "sup_grad", "step"]);
    samples.push(&[0.0, sup(&u), sup(&gradient_with_walls(&u, grid)), 0.0]);
    let mut outcome = Outcome::Exhausted;
    let mut iterations = 0;
    for n in 1..=cfg.max_iters {
        iterations = n;
        let grad = gradient_with_walls(&u, grid);
        let extra: Vec<f64> = grad.iter().map(|g| g.powf(q)).collect();
        if extra.iter().any(|v| !v.is_finite()) {
            outcome = Outcome::Diverged;
            break;
        }
        let solved = march(&pr, Some(&extra), None)?.u.values;
        let next: Vec<f64> = solved.iter().zip(&u).map(|(a, b)| (1.0 - cfg.damping) * b + cfg.damping * a).collect();
        let step = sup_diff(&next, &u);
        u = next;
        samples.push(&[n as f64, sup(&u), sup(&grad), step]);
        if u.iter().any(|v| !v.is_finite() || v.abs() > ceiling) {
            outcome = Outcome::Diverged;
            break;
        }
        if step < cfg.tol * (1.0 + sup(&u)) {
            outcome = Outcome::Converged;
            break;
        }
    }
    let u = GridFunction::new(grid.clone(), u)?;
    let mut report = VerificationReport::new("riccati")
        .param("q", Num(q))
        .param("scheme", pr.scheme)
        .param("ceiling", Num(ceiling))
        .param("damping", Num(cfg.damping));
    report.samples = samples;
    report.set_constant("iterations", iterations as f64);
    report.set_constant("sup_u", u.sup_abs());
    if outcome != Outcome::Converged {
        return Ok((u, report.finish(false, outcome.status())));
    }
    let omega = pr.data()?;
    let gr = gradient_ratios(&u, &omega, None)?;
    let lambda = gr.grad.iter().zip(&gr.potential).map(|(g, i)| ratio(*g, *i)).fold(0.0, f64::max);
    let mut gfield = GridFunction::zeros(grid.clone());
    let mut pfield = GridFunction::zeros(grid.clone());
    for (&c, (g, i)) in gr.cells.iter().zip(gr.grad.iter().zip(&gr.potential)) {
        gfield.values[c] = *g;
        pfield.values[c] = *i;
    }
    let weak = NormSpec::lorentz((q - 1.0) * (grid.dim() as f64 + 2.0), f64::INFINITY);
    let (gn, pn) = (lorentz_norm(&gfield, &weak)?, lorentz_norm(&pfield, &weak)?);
    report.set_constant("Lambda", lambda);
    report.set_constant("weak_gradient_norm", gn);
    report.set_constant("weak_potential_norm", pn);
    report.set_constant("weak_ratio", ratio(gn, pn));
    report.set_constant("excluded_nodes", gr.excluded as f64);
    report.worst_ratio = lambda.into();
    let pass = lambda.is_finite() && ratio(gn, pn).is_finite();
    Ok((u, report.finish(pass, if pass { "converged" } else { "fail" })))
}

/// Bracket `[lo, hi]` of the data scale where a monotone family switches from
/// converging to diverging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBracket {
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

impl ThresholdBracket {
    pub fn relative_width(&self) -> f64 {
        self.hi / self.lo - 1.0
    }
}

/// Geometric bisection until `hi/lo - 1 ≤ rel`. The starting bracket is
/// widened by factors of 2 if `converges(lo)` fails or `converges(hi)` holds.
pub fn bisect_threshold(mut lo: f64, mut hi: f64, rel: f64, mut converges: impl FnMut(f64) -> Result<bool>) -> Result<ThresholdBracket> {
    if !(lo > 0.0 && hi > lo && rel > 0.0) {
        return invalid("bisection needs 0 < lo < hi and a positive tolerance");
    }
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        converges(x)
    };
    let mut widen = 0;
    while !eval(lo)? {
        hi = lo;
        lo /= 2.0;
        widen += 1;
        if widen > 40 {
            return Err(Error::NotConverged { iterations: widen, residual: lo });
        }
    }
    while eval(hi)? {
        lo = hi;
        hi *= 2.0;
        widen += 1;
        if widen > 40 {
            return Err(Error::NotConverged { iterations: widen, residual: hi });
        }
    }
    while hi / lo - 1.0 > rel {
        let mid = (lo * hi).sqrt();
        if eval(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdBracket { lo, hi, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimePoint;
    use crate::heat::{free_space_at, solve_dirichlet, HeatProblem};
    use crate::measure::Density;

    fn bump(g: &GridSpec, scale: f64) -> GridFunction {
        GridFunction::from_fn(g.clone(), |z| {
            let r2: f64 = z.x.iter().map(|v| v * v).sum::<f64>() + z.t * z.t;
            scale * (1.0 - r2).max(0.0)
        })
    }

    fn picard(scale: f64) -> (GridFunction, VerificationReport) {
        let g = GridSpec::cube(1, 1.0, 10, -1.0, 1.0, 10).unwrap();
        let cfg = IterationConfig::new(IterationMode::Potential, 2.0).with_max_iters(400);
        picard_potential_iteration(&bump(&g, scale), &PotentialSpec::new(1.5), &cfg).unwrap()
    }

    #[test]
    fn picard_of_zero_is_zero() {
        let (u, rep) = picard(0.0);
        assert!(u.values.iter().all(|v| *v == 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn small_picard_datum_converges_below_the_bound() {
        let (u, rep) = picard(0.05);
        assert!(rep.pass, "{}", rep.to_json());
        assert_eq!(rep.constant("bound_violations"), Some(0.0));
        // the limit solves the fixed-point equation
        let g = u.grid.clone();
        let l = LatticePotential::new(&g, &PotentialSpec::new(1.5)).unwrap();
        let f = bump(&g, 0.05);
        let i = l.apply(&u.values.iter().map(|v| v * v).collect::<Vec<_>>()).unwrap();
        for j in 0..g.len() {
            assert!((u.values[j] - i[j] - f.values[j]).abs() < 1e-5);
        }
    }

    #[test]
    fn large_picard_datum_diverges_and_the_threshold_is_bracketed() {
        let (_, rep) = picard(50.0);
        assert_eq!(rep.status, "diverged");
        let b = bisect_threshold(0.05, 50.0, 0.01, |s| Ok(picard(s).1.status == "converged")).unwrap();
        assert!(b.relative_width() <= 0.01 && b.lo > 0.05);
    }

    #[test]
    fn bisection_finds_a_known_switch() {
        let b = bisect_threshold(1.0, 2.0, 1e-3, |x| Ok(x < 7.3)).unwrap();
        assert!(b.lo < 7.3 && b.hi >= 7.3 && b.relative_width() <= 1e-3);
        assert!(bisect_threshold(2.0, 1.0, 0.1, |_| Ok(true)).is_err());
    }

    fn grid2() -> GridSpec {
        GridSpec::cube(2, 2.0, 16, 0.0, 0.5, 40).unwrap()
    }

    #[test]
    fn zero_data_give_zero_for_every_problem() {
        let z = DiscreteMeasure::zero(2);
        for mode in [IterationMode::LaneEmdenAbsorption, IterationMode::LaneEmdenSource] {
            let (u, _) = lane_emden_solve(&z, &z, &IterationConfig::new(mode, 3.0), &grid2()).unwrap();
            assert!(u.values.iter().all(|v| *v == 0.0));
        }
        let (u, rep) = riccati_solve(&z, &z, &IterationConfig::new(IterationMode::Riccati, 2.0), &grid2()).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
        assert_eq!(rep.status, "converged");
    }

    #[test]
    fn absorption_lies_below_the_heat_solution() {
        let sigma = DiscreteMeasure::dirac(&SpaceTimePoint::new(vec![0.125, 0.125], 0.0), 1.0);
        let g = grid2();
        let cfg = IterationConfig::new(IterationMode::LaneEmdenAbsorption, 3.0);
        let (u, rep) = lane_emden_solve(&DiscreteMeasure::zero(2), &sigma, &cfg, &g).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        assert!(rep.constant("max_ratio_to_linear").unwrap() <= 1.0);
        assert!(rep.constant("sup_u").unwrap() < rep.constant("sup_linear").unwrap());
        // against the exact Gaussian, allowing for the cell-averaged start
        let pr = HeatProblem::new(DiscreteMeasure::zero(2), sigma, Domain::FreeSpace, g.clone(), Scheme::Explicit).unwrap();
        let exact = free_space_at(&pr, &g.centers()).unwrap();
        let m = g.spatial_len();
        for k in 10..g.steps {
            for s in 0..m {
                assert!(u.values[k * m + s] <= exact[k * m + s] * 1.05 + 1e-3);
            }
        }
    }

    #[test]
    fn source_blows_up_for_large_data() {
        let g = grid2();
        let cfg = IterationConfig::new(IterationMode::LaneEmdenSource, 3.0).with_ceiling(1e6);
        let small = Density::new(g.clone(), bump(&g, 0.1).values).unwrap();
        let mu = DiscreteMeasure::new(2, vec![], Some(small.clone())).unwrap();
        let (_, rep) = lane_emden_solve(&mu, &DiscreteMeasure::zero(2), &cfg, &g).unwrap();
        assert!(rep.pass);
        let big = Density::new(g.clone(), bump(&g, 200.0).values).unwrap();
        let mu = DiscreteMeasure::new(2, vec![], Some(big)).unwrap();
        let (_, rep) = lane_emden_solve(&mu, &DiscreteMeasure::zero(2), &cfg, &g).unwrap();
        assert_eq!(rep.status, "diverged");
    }

    fn mollified(g: &GridSpec, scale: f64) -> DiscreteMeasure {
        let d = Density::new(
            g.clone(),
            GridFunction::from_fn(g.clone(), |z| {
                let r2: f64 = z.x.iter().map(|v| v * v).sum();
                if r2 < 0.1 && z.t < 0.05 {
                    scale
                } else {
                    0.0
                }
            })
            .values,
        )
        .unwrap();
        DiscreteMeasure::new(g.dim(), vec![], Some(d)).unwrap()
    }

    #[test]
    fn riccati_without_the_gradient_term_is_the_heat_solve() {
        let g = grid2();
        let mu = mollified(&g, 1.0);
        let cfg = IterationConfig::new(IterationMode::Riccati, 2.0).with_max_iters(1).with_tol(1e300);
        let (u, _) = riccati_solve(&mu, &DiscreteMeasure::zero(2), &cfg, &g).unwrap();
        let pr = HeatProblem::new(mu.clone(), DiscreteMeasure::zero(2), Domain::DirichletBox, g.clone(), Scheme::Explicit).unwrap();
        let lin = solve_dirichlet(&pr).unwrap();
        // one step adds S(|∇u_0|^q), which is nonnegative
        assert!(u.values.iter().zip(&lin.values).all(|(a, b)| *a >= *b));
        let tiny = mollified(&g, 1e-9);
        let (u, _) = riccati_solve(&tiny, &DiscreteMeasure::zero(2), &cfg, &g).unwrap();
        let pr = HeatProblem::new(tiny, DiscreteMeasure::zero(2), Domain::DirichletBox, g.clone(), Scheme::Explicit).unwrap();
        let lin = solve_dirichlet(&pr).unwrap();
        // the correction is quadratic in the data scale
        for (a, b) in u.values.iter().zip(&lin.values) {
            assert!((a - b).abs() <= 1e-6 * b.abs() + 1e-20);
        }
    }

    #[test]
    fn small_riccati_data_converge_with_finite_constants() {
        let g = grid2();
        let (_, rep) = riccati_solve(&mollified(&g, 1.0), &DiscreteMeasure::zero(2), &IterationConfig::new(IterationMode::Riccati, 2.0), &g).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        let l = rep.constant("Lambda").unwrap();
        assert!(l > 0.0 && l.is_finite());
        assert!(rep.constant("weak_ratio").unwrap().is_finite());
    }

    #[test]
    fn config_validation() {
        assert!(IterationConfig::new(IterationMode::Riccati, 1.0).validate().is_err());
        assert!(IterationConfig::new(IterationMode::Riccati, 2.0).with_ceiling(0.0).validate().is_err());
        let cfg: IterationConfig = serde_json::from_str(r#"{"q": 2, "mode": "lane_emden_source"}"#).unwrap();
        assert_eq!(cfg.max_iters, 500);
        assert_eq!(cfg.q_prime(), 2.0);
    }
}
