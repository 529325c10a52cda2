//! Verification campaigns: a list of named checks run concurrently, one JSON
//! report and one profile CSV per check, and an index with the verdicts.

use crate::io::{read_grid_function, read_json, read_measure, resolve, CliError, CliResult};
use parapot::capacity::{
    capacity_equivalence_report, cylinder_scaling_check, isoperimetric_check, trace_constants, CapacitySpec, CompactSet,
    EquivalenceKind, TraceOptions,
};
use parapot::fixedpoint::{bisect_threshold, lane_emden_solve, picard_potential_iteration, riccati_solve, IterationConfig, ThresholdBracket};
use parapot::heat::{
    gradient_bound_check, refined, refinement_report, solve, verify_decay, lower_bound_refinement, verify_two_sided_bounds, DecayTarget,
    Domain, HeatProblem, SampledSolution, Scheme,
};
use parapot::norms::{
    exp_integrability_check, good_lambda_check, norm_equivalence_report, weak_mapping_check, ExpIntegrabilityOptions, GoodLambdaGrid,
    WeakMapOptions, Weight,
};
use parapot::potentials::{time_slice_bound_check, PotentialSpec, TimeSliceBranch};
use parapot::report::{emit_profile, Num, VerificationReport};
use parapot::{Atom, Density, DiscreteMeasure, GridFunction, GridSpec, ParabolicCylinder, SpaceTimePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    /// Measure file used by checks whose measure is `shared`.
    #[serde(default)]
    pub measure: Option<PathBuf>,
    /// Grid file used by checks that give no grid.
    #[serde(default)]
    pub grid: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the solver tolerances of every check.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckConfig {
    pub name: String,
    /// Outcome the check should have; `fail` marks a divergence witness.
    #[serde(default)]
    pub expect: Expect,
    #[serde(flatten)]
    pub check: Check,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

fn default_measure() -> MeasureInput {
    MeasureInput::Shared
}

/// Where a measure comes from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureInput {
    #[default]
    Shared,
    Zero { dim: usize },
    File { path: PathBuf },
    Inline { measure: DiscreteMeasure },
    Dirac {
        point: SpaceTimePoint,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `count` atoms uniform in `[-half_width, half_width]^N × [t_min, t_max]`
    /// with masses uniform in `[0.5, 1.5]`, signs random when `signed`.
    RandomAtoms {
        dim: usize,
        count: usize,
        #[serde(default = "one")]
        half_width: f64,
        #[serde(default)]
        t_min: f64,
        #[serde(default = "one")]
        t_max: f64,
        #[serde(default)]
        signed: bool,
    },
    /// Constant density of total `mass` on the cells of the check's grid with
    /// `|x - center| < radius` and `t0 ≤ t < t0 + duration`.
    Mollified {
        #[serde(default)]
        center: Vec<f64>,
        radius: f64,
        duration: f64,
        #[serde(default = "one")]
        mass: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// A family of sets for the capacity checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetInput {
    Cells { grid: GridSpec, cells: Vec<usize> },
    Cylinders(Vec<CylinderSet>),
}

/// Closed cylinder `Q̃_radius(center)`, discretized by the cell centers of
/// `grid` or, without a grid, by lattice nodes of spacing
/// `(radius/nodes, radius²/(2 nodes))` through the center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderSet {
    pub center: SpaceTimePoint,
    pub radius: f64,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "three")]
    pub nodes: f64,
}

fn three() -> f64 {
    3.0
}

impl SetInput {
    pub fn build(&self) -> parapot::Result<Vec<CompactSet>> {
        match self {
            SetInput::Cells { grid, cells } => Ok(vec![CompactSet::new(grid.clone(), cells.clone())?]),
            SetInput::Cylinders(list) => list
                .iter()
                .map(|c| {
                    let cyl = ParabolicCylinder::centered(c.center.clone(), c.radius)?;
                    match &c.grid {
                        Some(g) => CompactSet::cylinder(g.clone(), &cyl),
                        None => CompactSet::cylinder_nodes(&cyl, c.radius / c.nodes, c.radius * c.radius / (2.0 * c.nodes)),
                    }
                })
                .collect(),
        }
    }
}

/// Origin-centered cylinders of the given radii on node lattices.
fn cylinders(dim: usize, radii: &[f64]) -> SetInput {
    SetInput::Cylinders(
        radii.iter().map(|&r| CylinderSet { center: SpaceTimePoint::origin(dim), radius: r, grid: None, nodes: 3.0 }).collect(),
    )
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bisection {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "one_percent")]
    pub rel: f64,
}

fn one_percent() -> f64 {
    0.01
}

/// Datum of the potential iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionInput {
    File { path: PathBuf },
    /// `scale · max(0, 1 - |x|² - t²)` on `grid`.
    Bump { grid: GridSpec, scale: f64 },
}

fn ten() -> f64 {
    10.0
}

fn two() -> f64 {
    2.0
}

fn fifteen_percent() -> f64 {
    0.15
}

fn twenty_percent() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Check {
    GoodLambda {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        spec: PotentialSpec,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        sweep: Option<GoodLambdaGrid>,
    },
    NormEquivalence {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        spec: PotentialSpec,
        q: f64,
        s: Num,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default = "ten")]
        acceptance: f64,
    },
    ExpIntegrability {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        spec: PotentialSpec,
        center: SpaceTimePoint,
        rho: f64,
        #[serde(default)]
        options: ExpIntegrabilityOptions,
    },
    WeakMapping {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        spec: PotentialSpec,
        #[serde(default)]
        options: WeakMapOptions,
    },
    TimeSlice {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        q: f64,
        x: Vec<f64>,
        branch: TimeSliceBranch,
    },
    CapacityScaling {
        spec: CapacitySpec,
        dim: usize,
        rho: f64,
        h: f64,
        tau: f64,
        #[serde(default = "fifteen_percent")]
        acceptance: f64,
        #[serde(default = "twenty_percent")]
        max_gap: f64,
    },
    Isoperimetric {
        spec: CapacitySpec,
        sets: SetInput,
        #[serde(default = "two")]
        acceptance: f64,
    },
    CapacityEquivalence {
        spec_a: CapacitySpec,
        spec_b: CapacitySpec,
        kind: EquivalenceKind,
        sets: SetInput,
        #[serde(default = "ten")]
        acceptance: f64,
    },
    Trace {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        spec: CapacitySpec,
        sets: SetInput,
        /// Grid of a gridded measure.
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        options: TraceOptions,
    },
    /// Two-sided bounds on a solve and on its refinement.
    HeatBounds {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        #[serde(default)]
        sigma: Option<MeasureInput>,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        domain: Domain,
        #[serde(default = "two")]
        max_change: f64,
    },
    HeatLower {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        #[serde(default)]
        grid: Option<GridSpec>,
        r: f64,
        #[serde(default = "two")]
        max_change: f64,
    },
    Decay {
        #[serde(default = "default_measure")]
        sigma: MeasureInput,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        domain: Domain,
        target: DecayTarget,
    },
    Gradient {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default = "two")]
        max_change: f64,
    },
    Picard {
        f: FunctionInput,
        spec: PotentialSpec,
        config: IterationConfig,
        #[serde(default)]
        bisect: Option<Bisection>,
    },
    LaneEmden {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        #[serde(default)]
        sigma: Option<MeasureInput>,
        config: IterationConfig,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        decay: Option<DecayTarget>,
    },
    Riccati {
        #[serde(default = "default_measure")]
        measure: MeasureInput,
        #[serde(default)]
        sigma: Option<MeasureInput>,
        config: IterationConfig,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        bisect: Option<Bisection>,
    },
}

impl Check {
    pub fn op(&self) -> &'static str {
        match self {
            Check::GoodLambda { .. } => "good_lambda",
            Check::NormEquivalence { .. } => "norm_equivalence",
            Check::ExpIntegrability { .. } => "exp_integrability",
            Check::WeakMapping { .. } => "weak_mapping",
            Check::TimeSlice { .. } => "time_slice",
            Check::CapacityScaling { .. } => "capacity_scaling",
            Check::Isoperimetric { .. } => "isoperimetric",
            Check::CapacityEquivalence { .. } => "capacity_equivalence",
            Check::Trace { .. } => "trace",
            Check::HeatBounds { .. } => "heat_bounds",
            Check::HeatLower { .. } => "heat_lower",
            Check::Decay { .. } => "decay",
            Check::Gradient { .. } => "gradient",
            Check::Picard { .. } => "picard",
            Check::LaneEmden { .. } => "lane_emden",
            Check::Riccati { .. } => "riccati",
        }
    }
}

/// Shared inputs available while a check is prepared.
struct Context<'a> {
    base: &'a Path,
    measure: Option<&'a DiscreteMeasure>,
    grid: Option<&'a GridSpec>,
    tol: Option<f64>,
}

impl Context<'_> {
    fn grid(&self, own: &Option<GridSpec>) -> CliResult<GridSpec> {
        own.clone()
            .or_else(|| self.grid.cloned())
            .ok_or_else(|| CliError::Parse("the check needs a grid and the campaign has no shared grid".into()))
    }

    fn measure(&self, input: &MeasureInput, grid: Option<&GridSpec>, rng: &mut ChaCha8Rng) -> CliResult<DiscreteMeasure> {
        Ok(match input {
            MeasureInput::Shared => {
                self.measure.cloned().ok_or_else(|| CliError::Parse("the check uses the shared measure but none is set".into()))?
            }
            MeasureInput::Zero { dim } => DiscreteMeasure::zero(*dim),
            MeasureInput::File { path } => read_measure(&resolve(path, Some(self.base)))?,
            MeasureInput::Inline { measure } => {
                measure.validate()?;
                measure.clone()
            }
            MeasureInput::Dirac { point, mass } => DiscreteMeasure::dirac(point, *mass),
            MeasureInput::RandomAtoms { dim, count, half_width, t_min, t_max, signed } => {
                random_atoms(rng, *dim, *count, *half_width, (*t_min, *t_max), *signed)?
            }
            MeasureInput::Mollified { center, radius, duration, mass } => {
                let g = grid.ok_or_else(|| CliError::Parse("a mollified measure needs the check's grid".into()))?;
                mollified(g, center, *radius, *duration, *mass)?
            }
        })
    }

    fn spec(&self, spec: &CapacitySpec) -> CapacitySpec {
        match self.tol {
            Some(t) => spec.clone().with_tolerance(t),
            None => spec.clone(),
        }
    }

    fn config(&self, cfg: &IterationConfig) -> IterationConfig {
        match self.tol {
            Some(t) => cfg.clone().with_tol(t),
            None => cfg.clone(),
        }
    }
}

/// `count` atoms with uniform positions and masses in `[0.5, 1.5]`.
pub fn random_atoms(rng: &mut ChaCha8Rng, dim: usize, count: usize, half: f64, t: (f64, f64), signed: bool) -> parapot::Result<DiscreteMeasure> {
    let atoms = (0..count)
        .map(|_| {
            let x = (0..dim).map(|_| rng.gen_range(-half..half)).collect();
            let s = rng.gen_range(t.0..t.1);
            let m = rng.gen_range(0.5..1.5);
            let sign = if signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            Atom::new(x, s, sign * m)
        })
        .collect();
    DiscreteMeasure::new(dim, atoms, None)
}

/// Constant density of total `mass` on a small space-time block of `grid`.
pub fn mollified(grid: &GridSpec, center: &[f64], radius: f64, duration: f64, mass: f64) -> parapot::Result<DiscreteMeasure> {
    let n = grid.dim();
    let c: Vec<f64> = if center.is_empty() { vec![0.0; n] } else { center.to_vec() };
    let inside = |z: &SpaceTimePoint| {
        z.x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < radius * radius && z.t < grid.t0 + duration
    };
    let count = grid.centers().iter().filter(|z| inside(z)).count();
    if count == 0 {
        return Err(parapot::Error::InvalidParameter("the mollifier covers no cell of the grid".into()));
    }
    let level = mass / (count as f64 * grid.cell_volume());
    let values = GridFunction::from_fn(grid.clone(), |z| if inside(z) { level } else { 0.0 }).values;
    DiscreteMeasure::new(n, Vec::new(), Some(Density::new(grid.clone(), values)?))
}

fn bump(grid: &GridSpec, scale: f64) -> GridFunction {
    GridFunction::from_fn(grid.clone(), |z| {
        let r2: f64 = z.x.iter().map(|v| v * v).sum::<f64>() + z.t * z.t;
        scale * (1.0 - r2).max(0.0)
    })
}

type Task = Box<dyn Fn() -> parapot::Result<VerificationReport> + Send + Sync>;

/// Seed of one check: the campaign seed mixed with the check name.
pub fn check_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

fn heat_problem(mu: DiscreteMeasure, sigma: DiscreteMeasure, grid: GridSpec, domain: Domain) -> parapot::Result<HeatProblem> {
    let scheme = if grid.tau() <= parapot::heat::stability_limit(&grid) { Scheme::Explicit } else { Scheme::CrankNicolson };
    HeatProblem::new(mu, sigma, domain, grid, scheme)
}

fn zero_like(mu: &DiscreteMeasure) -> DiscreteMeasure {
    DiscreteMeasure::zero(mu.dim)
}

/// Truncation radius `2 T_0` with `T_0 = diam + T^{1/2}`.
fn truncation(grid: &GridSpec) -> f64 {
    2.0 * (grid.diameter() + (grid.t1 - grid.t0).max(0.0).sqrt())
}

fn merge_bracket(mut report: VerificationReport, b: &ThresholdBracket) -> VerificationReport {
    report.set_constant("threshold_lo", b.lo);
    report.set_constant("threshold_hi", b.hi);
    report.set_constant("threshold_relative_width", b.relative_width());
    report.set_constant("bisection_evaluations", b.evaluations as f64);
    report
}

fn prepare(check: &Check, ctx: &Context, seed: u64) -> CliResult<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task: Task = match check {
        Check::GoodLambda { measure, spec, grid, sweep } => {
            let (mu, spec, g, sweep) = (ctx.measure(measure, None, &mut rng)?, spec.clone(), ctx.grid(grid)?, sweep.clone());
            Box::new(move || good_lambda_check(&mu, &spec, sweep.as_ref(), &Weight::uniform(&g)))
        }
        Check::NormEquivalence { measure, spec, q, s, grid, acceptance } => {
            let (mu, spec, g, q, s, acc) = (ctx.measure(measure, None, &mut rng)?, spec.clone(), ctx.grid(grid)?, *q, s.0, *acceptance);
            Box::new(move || norm_equivalence_report(&mu, &spec, q, s, &Weight::uniform(&g), acc))
        }
        Check::ExpIntegrability { measure, spec, center, rho, options } => {
            let mu = ctx.measure(measure, None, &mut rng)?;
            let cyl = ParabolicCylinder::centered(center.clone(), *rho)?;
            let (spec, options) = (spec.clone(), options.clone());
            Box::new(move || exp_integrability_check(&mu, &spec, &cyl, &options))
        }
        Check::WeakMapping { measure, spec, options } => {
            let (mu, spec, options) = (ctx.measure(measure, None, &mut rng)?, spec.clone(), options.clone());
            Box::new(move || weak_mapping_check(&mu, &spec, &options))
        }
        Check::TimeSlice { measure, q, x, branch } => {
            let (mu, q, x, branch) = (ctx.measure(measure, None, &mut rng)?, *q, x.clone(), *branch);
            Box::new(move || time_slice_bound_check(&mu, q, &x, branch))
        }
        Check::CapacityScaling { spec, dim, rho, h, tau, acceptance, max_gap } => {
            let spec = ctx.spec(spec);
            let (dim, rho, h, tau, acc, gap) = (*dim, *rho, *h, *tau, *acceptance, *max_gap);
            Box::new(move || cylinder_scaling_check(&spec, dim, rho, h, tau, acc, gap))
        }
        Check::Isoperimetric { spec, sets, acceptance } => {
            let (spec, family, acc) = (ctx.spec(spec), sets.build()?, *acceptance);
            Box::new(move || isoperimetric_check(&family, &spec, acc))
        }
        Check::CapacityEquivalence { spec_a, spec_b, kind, sets, acceptance } => {
            let (a, b, kind, family, acc) = (ctx.spec(spec_a), ctx.spec(spec_b), *kind, sets.build()?, *acceptance);
            Box::new(move || capacity_equivalence_report(&family, &a, &b, kind, acc))
        }
        Check::Trace { measure, spec, sets, grid, options } => {
            let g = grid.clone().or_else(|| ctx.grid.cloned());
            let (mu, spec, family, options) = (ctx.measure(measure, g.as_ref(), &mut rng)?, ctx.spec(spec), sets.build()?, *options);
            Box::new(move || trace_constants(&mu, &spec, &family, options))
        }
        Check::HeatBounds { measure, sigma, grid, domain, max_change } => {
            let g = ctx.grid(grid)?;
            let mu = ctx.measure(measure, Some(&g), &mut rng)?;
            let sigma = match sigma {
                Some(s) => ctx.measure(s, Some(&g), &mut rng)?,
                None => zero_like(&mu),
            };
            let (domain, max_change) = (*domain, *max_change);
            Box::new(move || {
                let run = |g: &GridSpec| -> parapot::Result<VerificationReport> {
                    let u = solve(&heat_problem(mu.clone(), sigma.clone(), g.clone(), domain)?)?;
                    verify_two_sided_bounds(&SampledSolution::from_grid(&u), &mu, &sigma, truncation(g))
                };
                Ok(refinement_report(&run(&g)?, &run(&refined(&g)?)?, "K", max_change))
            })
        }
        Check::HeatLower { measure, grid, r, max_change } => {
            let g = ctx.grid(grid)?;
            let mu = ctx.measure(measure, Some(&g), &mut rng)?;
            let (r, max_change) = (*r, *max_change);
            Box::new(move || {
                let run = |g: GridSpec| solve(&heat_problem(mu.clone(), zero_like(&mu), g, Domain::FreeSpace)?);
                lower_bound_refinement(&run(g.clone())?, &run(refined(&g)?)?, &mu, r, max_change)
            })
        }
        Check::Decay { sigma, grid, domain, target } => {
            let g = ctx.grid(grid)?;
            let sigma = ctx.measure(sigma, Some(&g), &mut rng)?;
            let (domain, target) = (*domain, *target);
            Box::new(move || {
                let mass = sigma.abs().total_mass();
                let u = solve(&heat_problem(zero_like(&sigma), sigma.clone(), g.clone(), domain)?)?;
                verify_decay(&SampledSolution::from_grid(&u), target, Some(mass))
            })
        }
        Check::Gradient { measure, grid, max_change } => {
            let g = ctx.grid(grid)?;
            let mu = ctx.measure(measure, Some(&g), &mut rng)?;
            let max_change = *max_change;
            Box::new(move || {
                let run = |g: &GridSpec| -> parapot::Result<VerificationReport> {
                    let u = solve(&heat_problem(mu.clone(), zero_like(&mu), g.clone(), Domain::FreeSpace)?)?;
                    gradient_bound_check(&u, &mu)
                };
                Ok(refinement_report(&run(&g)?, &run(&refined(&g)?)?, "C_2", max_change))
            })
        }
        Check::Picard { f, spec, config, bisect } => {
            let f = match f {
                FunctionInput::File { path } => read_grid_function(&resolve(path, Some(ctx.base)))?,
                FunctionInput::Bump { grid, scale } => bump(grid, *scale),
            };
            let (spec, cfg, bisect) = (spec.clone(), ctx.config(config), *bisect);
            cfg.validate()?;
            Box::new(move || {
                let (_, report) = picard_potential_iteration(&f, &spec, &cfg)?;
                match bisect {
                    None => Ok(report),
                    Some(b) => {
                        let bracket = bisect_threshold(b.lo, b.hi, b.rel, |s| {
                            Ok(picard_potential_iteration(&f.map(|v| v * s), &spec, &cfg)?.1.status == "converged")
                        })?;
                        Ok(merge_bracket(report, &bracket))
                    }
                }
            })
        }
        Check::LaneEmden { measure, sigma, config, grid, decay } => {
            let g = ctx.grid(grid)?;
            let mu = ctx.measure(measure, Some(&g), &mut rng)?;
            let sigma = match sigma {
                Some(s) => ctx.measure(s, Some(&g), &mut rng)?,
                None => zero_like(&mu),
            };
            let (cfg, decay) = (ctx.config(config), *decay);
            cfg.validate()?;
            Box::new(move || {
                let (u, mut report) = lane_emden_solve(&mu, &sigma, &cfg, &g)?;
                if let Some(target) = decay {
                    let d = verify_decay(&SampledSolution::from_grid(&u), target, None)?;
                    for (k, v) in &d.fitted_constants {
                        report.set_constant(&format!("decay_{k}"), v.0);
                    }
                    report.samples = d.samples.clone();
                    let pass = report.pass && d.pass;
                    let status = if pass { "pass".to_string() } else if !d.pass { format!("decay {}", d.status) } else { report.status.clone() };
                    report = report.finish(pass, &status);
                }
                Ok(report)
            })
        }
        Check::Riccati { measure, sigma, config, grid, bisect } => {
            let g = ctx.grid(grid)?;
            let mu = ctx.measure(measure, Some(&g), &mut rng)?;
            let sigma = match sigma {
                Some(s) => ctx.measure(s, Some(&g), &mut rng)?,
                None => zero_like(&mu),
            };
            let (cfg, bisect) = (ctx.config(config), *bisect);
            cfg.validate()?;
            Box::new(move || {
                let (_, report) = riccati_solve(&mu, &sigma, &cfg, &g)?;
                match bisect {
                    None => Ok(report),
                    Some(b) => {
                        let bracket = bisect_threshold(b.lo, b.hi, b.rel, |s| {
                            Ok(riccati_solve(&mu.scaled(s), &sigma.scaled(s), &cfg, &g)?.1.status == "converged")
                        })?;
                        Ok(merge_bracket(report, &bracket))
                    }
                }
            })
        }
    };
    Ok(task)
}

/// One row of the campaign index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub op: String,
    pub pass: bool,
    pub expect: Expect,
    pub status: String,
    pub worst_ratio: Num,
    pub report: Option<String>,
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignIndex {
    pub seed: u64,
    pub tol: Option<f64>,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub checks: Vec<IndexEntry>,
}

impl CampaignIndex {
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            3
        } else if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

pub struct CampaignRun {
    pub index: CampaignIndex,
}

/// Parses a configuration file; relative paths inside it resolve against
/// its directory.
pub fn load_config(path: &Path) -> CliResult<CampaignConfig> {
    read_json(path)
}

/// Resolves every input (parse errors surface here, before anything runs),
/// runs the checks concurrently and writes the reports serially.
pub fn run_campaign(cfg: &CampaignConfig, base: &Path, out_dir: Option<&Path>) -> CliResult<CampaignRun> {
    let mut names = BTreeSet::new();
    for c in &cfg.checks {
        if c.name.is_empty() || c.name.contains(['/', '\\']) {
            return Err(CliError::Parse(format!("check name {:?} must be nonempty and free of path separators", c.name)));
        }
        if !names.insert(c.name.as_str()) {
            return Err(CliError::Parse(format!("check name {:?} appears twice", c.name)));
        }
    }
    let measure = cfg.measure.as_ref().map(|p| read_measure(&resolve(p, Some(base)))).transpose()?;
    let grid: Option<GridSpec> = cfg.grid.as_ref().map(|p| read_json(&resolve(p, Some(base)))).transpose()?;
    if let Some(g) = &grid {
        g.validate()?;
    }
    if let Some(t) = cfg.tol {
        if !(t > 0.0) {
            return Err(CliError::Parse(format!("tolerance {t} must be positive")));
        }
    }
    let ctx = Context { base, measure: measure.as_ref(), grid: grid.as_ref(), tol: cfg.tol };
    let tasks: Vec<(u64, Task)> = cfg
        .checks
        .iter()
        .map(|c| {
            let seed = check_seed(cfg.seed, &c.name);
            prepare(&c.check, &ctx, seed).map(|t| (seed, t)).map_err(|e| match e {
                CliError::Parse(m) => CliError::Parse(format!("check {:?}: {m}", c.name)),
                other => other,
            })
        })
        .collect::<CliResult<_>>()?;
    let results: Vec<parapot::Result<VerificationReport>> = tasks.par_iter().map(|(_, t)| t()).collect();
    let out_dir = out_dir.map(Path::to_path_buf).or_else(|| cfg.out_dir.as_ref().map(|d| resolve(d, Some(base))));
    if let Some(d) = &out_dir {
        std::fs::create_dir_all(d).map_err(|e| CliError::Internal(format!("{}: {e}", d.display())))?;
    }
    let mut entries = Vec::new();
    let mut errors = 0;
    for ((c, (seed, _)), result) in cfg.checks.iter().zip(&tasks).zip(results) {
        let entry = match result {
            Ok(report) => {
                let report = report.param("seed", seed).param("check_name", &c.name);
                log::info!("{}: {}", c.name, report.status);
                let (mut rp, mut pp) = (None, None);
                if let Some(d) = &out_dir {
                    let (r, p) = (format!("{}.json", c.name), format!("{}.csv", c.name));
                    write(&d.join(&r), &report.to_json())?;
                    write(&d.join(&p), &emit_profile(&report))?;
                    rp = Some(r);
                    pp = Some(p);
                }
                let e = IndexEntry {
                    name: c.name.clone(),
                    op: c.check.op().into(),
                    pass: report.pass == (c.expect == Expect::Pass),
                    expect: c.expect,
                    status: report.status.clone(),
                    worst_ratio: report.worst_ratio,
                    report: rp,
                    profile: pp,
                };
                e
            }
            Err(err) => {
                log::error!("{}: {err}", c.name);
                errors += 1;
                IndexEntry {
                    name: c.name.clone(),
                    op: c.check.op().into(),
                    pass: false,
                    expect: c.expect,
                    status: format!("error: {err}"),
                    worst_ratio: Num(f64::NAN),
                    report: None,
                    profile: None,
                }
            }
        };
        entries.push(entry);
    }
    let passed = entries.iter().filter(|e| e.pass).count();
    let index = CampaignIndex {
        seed: cfg.seed,
        tol: cfg.tol,
        total: entries.len(),
        passed,
        failed: entries.len() - passed - errors,
        errors,
        checks: entries,
    };
    if let Some(d) = &out_dir {
        write(&d.join("index.json"), &serde_json::to_string_pretty(&index).expect("index serializes"))?;
    }
    Ok(CampaignRun { index })
}

fn write(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

/// Default campaign mirroring the acceptance properties at desk scale.
pub fn acceptance_campaign(seed: u64) -> CampaignConfig {
    let json = serde_json::json!({
        "seed": seed,
        "checks": [
            {"name": "good_lambda", "op": "good_lambda", "spec": {"alpha": 1.0, "p": 2.0, "R": 4.0},
             "measure": {"kind": "random_atoms", "dim": 2, "count": 10, "half_width": 1.0, "t_min": -0.5, "t_max": 0.5},
             "grid": {"corner": [-2.0, -2.0], "sides": [4.0, 4.0], "t0": -2.0, "t1": 2.0, "cells": [10, 10], "steps": 10}},
            {"name": "norm_equivalence", "op": "norm_equivalence", "spec": {"alpha": 1.0, "p": 2.0, "R": 4.0}, "q": 2.0, "s": 2.0,
             "measure": {"kind": "random_atoms", "dim": 2, "count": 10, "half_width": 1.0, "t_min": -0.5, "t_max": 0.5},
             "grid": {"corner": [-2.0, -2.0], "sides": [4.0, 4.0], "t0": -2.0, "t1": 2.0, "cells": [10, 10], "steps": 10}},
            {"name": "capacity_scaling", "op": "capacity_scaling",
             "spec": {"kernel": "riesz_e", "alpha": 1.0, "p": 2.0, "tolerance": 0.01},
             "dim": 2, "rho": 1.0, "h": 0.5, "tau": 0.25, "acceptance": 0.15},
            {"name": "isoperimetric", "op": "isoperimetric",
             "spec": {"kernel": "riesz_e", "alpha": 1.0, "p": 2.0, "tolerance": 0.01},
             "sets": cylinders(2, &[1.0, 0.5, 0.25, 0.125])},
            {"name": "trace_density", "op": "trace",
             "spec": {"kernel": "riesz_e", "alpha": 1.0, "p": 2.0, "tolerance": 0.01},
             "measure": {"kind": "mollified", "radius": 1.0, "duration": 1.0, "mass": 3.141592653589793},
             "grid": {"corner": [-1.0, -1.0], "sides": [2.0, 2.0], "t0": -0.5, "t1": 0.5, "cells": [8, 8], "steps": 8},
             "sets": cylinders(2, &[1.0, 0.5, 0.25, 0.125])},
            {"name": "trace_dirac", "op": "trace", "expect": "fail",
             "spec": {"kernel": "riesz_e", "alpha": 1.0, "p": 2.0, "tolerance": 0.01},
             "measure": {"kind": "dirac", "point": {"x": [0.0, 0.0], "t": 0.0}},
             "sets": cylinders(2, &[1.0, 0.5, 0.25, 0.125])},
            {"name": "heat_bounds", "op": "heat_bounds",
             "measure": {"kind": "random_atoms", "dim": 2, "count": 4, "half_width": 0.5, "t_min": 0.0, "t_max": 0.2, "signed": true},
             "grid": {"corner": [-1.0, -1.0], "sides": [2.0, 2.0], "t0": 0.0, "t1": 1.0, "cells": [8, 8], "steps": 64}},
            {"name": "heat_lower", "op": "heat_lower", "r": 2.0,
             "measure": {"kind": "random_atoms", "dim": 2, "count": 4, "half_width": 0.5, "t_min": 0.0, "t_max": 0.2},
             "grid": {"corner": [-1.0, -1.0], "sides": [2.0, 2.0], "t0": 0.0, "t1": 2.0, "cells": [8, 8], "steps": 64}},
            {"name": "decay_gaussian", "op": "decay", "sigma": {"kind": "dirac", "point": {"x": [0.0, 0.0], "t": 0.0}},
             "domain": "free_space", "target": {"slope": -1.0, "tol": 0.02},
             "grid": {"corner": [-1.0, -1.0], "sides": [2.0, 2.0], "t0": 0.0, "t1": 4.0, "cells": [5, 5], "steps": 16}},
            {"name": "gradient", "op": "gradient", "measure": {"kind": "dirac", "point": {"x": [0.01, -0.02], "t": 0.0}},
             "grid": {"corner": [-1.0, -1.0], "sides": [2.0, 2.0], "t0": -0.25, "t1": 1.0, "cells": [9, 9], "steps": 10}},
            {"name": "picard", "op": "picard", "spec": {"alpha": 1.5},
             "f": {"kind": "bump", "scale": 0.05,
                   "grid": {"corner": [-1.0], "sides": [2.0], "t0": -1.0, "t1": 1.0, "cells": [16], "steps": 16}},
             "config": {"mode": "potential", "q": 2.0, "max_iters": 2000},
             "bisect": {"lo": 0.05, "hi": 50.0, "rel": 0.01}},
            {"name": "lane_emden_absorption", "op": "lane_emden",
             "measure": {"kind": "zero", "dim": 2},
             "sigma": {"kind": "dirac", "point": {"x": [0.125, 0.125], "t": 0.0}},
             "config": {"mode": "lane_emden_absorption", "q": 3.0},
             "grid": {"corner": [-4.0, -4.0], "sides": [8.0, 8.0], "t0": 0.0, "t1": 1.0, "cells": [32, 32], "steps": 80},
             "decay": {"slope": -0.5, "tol": 0.1, "one_sided": true, "window": [0.1, 1.0]}},
            {"name": "riccati", "op": "riccati",
             "measure": {"kind": "mollified", "radius": 0.3, "duration": 0.05, "mass": 0.1},
             "config": {"mode": "riccati", "q": 2.0},
             "grid": {"corner": [-2.0, -2.0], "sides": [4.0, 4.0], "t0": 0.0, "t1": 0.5, "cells": [16, 16], "steps": 40}}
        ]
    });
    serde_json::from_value(json).expect("built-in campaign parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_campaign_has_an_empty_index() {
        let run = run_campaign(&CampaignConfig::default(), Path::new("."), None).unwrap();
        assert_eq!(run.index.total, 0);
        assert_eq!(run.index.exit_code(), 0);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let check = CheckConfig { name: "a".into(), expect: Expect::Pass, check: Check::Decay {
            sigma: MeasureInput::Zero { dim: 1 },
            grid: Some(GridSpec::cube(1, 1.0, 4, 0.0, 1.0, 8).unwrap()),
            domain: Domain::FreeSpace,
            target: DecayTarget::heat(1),
        } };
        let cfg = CampaignConfig { checks: vec![check.clone(), check], ..Default::default() };
        assert!(matches!(run_campaign(&cfg, Path::new("."), None), Err(CliError::Parse(_))));
    }

    #[test]
    fn seeds_differ_per_check_and_repeat_per_name() {
        assert_eq!(check_seed(7, "a"), check_seed(7, "a"));
        assert_ne!(check_seed(7, "a"), check_seed(7, "b"));
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_atoms(&mut r1, 2, 5, 1.0, (0.0, 1.0), true).unwrap(), random_atoms(&mut r2, 2, 5, 1.0, (0.0, 1.0), true).unwrap());
    }

    #[test]
    fn mollifier_carries_its_mass() {
        let g = GridSpec::cube(2, 1.0, 10, 0.0, 1.0, 10).unwrap();
        let m = mollified(&g, &[], 0.35, 0.2, 2.5).unwrap();
        assert!((m.total_mass() - 2.5).abs() < 1e-12);
        assert!(mollified(&g, &[5.0, 5.0], 0.1, 0.2, 1.0).is_err());
    }

    #[test]
    fn built_in_campaign_has_a_dozen_checks() {
        let cfg = acceptance_campaign(1);
        assert!(cfg.checks.len() >= 10);
        let names: BTreeSet<_> = cfg.checks.iter().map(|c| c.name.clone()).collect();
        assert_eq!(names.len(), cfg.checks.len());
    }
}
