//! `parapot`: potentials, capacities, heat solves and verification campaigns
//! from the command line.

mod campaign;
mod io;

use campaign::{acceptance_campaign, load_config, run_campaign, SetInput};
use clap::{Args, Parser, Subcommand, ValueEnum};
use io::{emit, json_arg, points_csv, read_grid_function, read_measure, read_points, read_solution, CliError, CliResult};
use parapot::capacity::{solve_capacity, trace_constants, CapacitySpec, SolverChoice, TraceOptions};
use parapot::fixedpoint::{bisect_threshold, lane_emden_solve, picard_potential_iteration, riccati_solve, IterationConfig, IterationMode};
use parapot::heat::{gradient_bound_check, solve, verify_decay, verify_lower_bound, verify_two_sided_bounds, DecayTarget, HeatProblem, SampledSolution};
use parapot::norms::{
    exp_integrability_check, good_lambda_check, lorentz_morrey_scan, lorentz_norm, norm_equivalence_report, weak_mapping_check,
    ExpIntegrabilityOptions, Morrey, NormSpec, WeakMapOptions, Weight,
};
use parapot::potentials::{evaluate_many, PotentialKind, PotentialSpec};
use parapot::report::{Num, VerificationReport};
use parapot::{DiscreteMeasure, GridSpec, ParabolicCylinder, SpaceTimePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "parapot", version, about = "Parabolic potentials, capacities and measure-data heat problems")]
struct Cli {
    /// Seed of every random choice (points, measure families).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides solver tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Base directory for relative output paths.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a potential of a measure at points.
    #[command(subcommand)]
    Potential(PotentialCmd),
    /// Lorentz or Lorentz–Morrey norm of a sampled function.
    Norm {
        #[arg(long)]
        spec: String,
        /// Node CSV `x1..xN,t,value` on a uniform lattice.
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inequality checks on a measure.
    Verify(VerifyArgs),
    /// Capacity of a set.
    Capacity {
        #[arg(long)]
        set: String,
        #[arg(long)]
        spec: String,
        #[arg(long, value_enum, default_value_t = SolverArg::Both)]
        solver: SolverArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heat equation with measure data.
    #[command(subcommand)]
    Heat(HeatCmd),
    /// `u_t - Δu = |∇u|^q + μ` by Picard iteration.
    Riccati {
        #[command(flatten)]
        data: SolveData,
        #[arg(long)]
        q: f64,
        /// Bisect the data scale at which the iteration stops converging.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        bisect: Option<Vec<f64>>,
    },
    /// `u_t - Δu ± |u|^{q-1}u = μ`.
    LaneEmden {
        #[command(flatten)]
        data: SolveData,
        #[arg(long, value_enum)]
        mode: LaneEmdenMode,
        #[arg(long)]
        q: f64,
    },
    /// Picard iteration `u = K I[u^q] + f`.
    Picard {
        /// Node CSV of the nonnegative datum.
        #[arg(long)]
        f: PathBuf,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        bisect: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the checks of a campaign file.
    Campaign {
        /// Campaign JSON; omit with `--builtin` to run the desk-scale suite.
        #[arg(long, required_unless_present = "builtin")]
        config: Option<PathBuf>,
        #[arg(long)]
        builtin: bool,
    },
}

#[derive(Subcommand)]
enum PotentialCmd {
    Eval {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        measure: PathBuf,
        /// CSV `x1..xN,t`; without it `--random` points are drawn.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Number of random points in the unit box `[-1,1]^N × [-1,1]`.
        #[arg(long, default_value_t = 100)]
        random: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Riesz,
    Maximal,
    Wolff,
    Heat,
    Bessel,
    Dyadic,
    Lowersum,
}

impl From<KindArg> for PotentialKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Riesz => PotentialKind::Riesz,
            KindArg::Maximal => PotentialKind::Maximal,
            KindArg::Wolff => PotentialKind::Wolff,
            KindArg::Heat => PotentialKind::Heat,
            KindArg::Bessel => PotentialKind::Bessel,
            KindArg::Dyadic => PotentialKind::Dyadic,
            KindArg::Lowersum => PotentialKind::Lowersum,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Primal,
    Dual,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaneEmdenMode {
    Absorption,
    Source,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: VerifyKind,
    #[arg(long)]
    measure: PathBuf,
    /// Potential spec (capacity spec for `trace`), inline or as a file.
    #[arg(long)]
    spec: String,
    /// Evaluation grid for `good-lambda` and `equivalence`.
    #[arg(long)]
    grid: Option<String>,
    /// Set family for `trace`.
    #[arg(long)]
    sets: Option<String>,
    /// Lorentz exponents for `equivalence`.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    /// Center `x1,..,xN,t` and radius for `exp-int`.
    #[arg(long, value_delimiter = ',')]
    center: Option<Vec<f64>>,
    #[arg(long)]
    rho: Option<f64>,
    /// Acceptance factor where the check takes one.
    #[arg(long, default_value_t = 10.0)]
    acceptance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    GoodLambda,
    Equivalence,
    ExpInt,
    WeakMap,
    Trace,
}

#[derive(Subcommand)]
enum HeatCmd {
    /// Solve a problem given as JSON and write the node list `x,t,u`.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a sampled solution against the pointwise estimates.
    Verify {
        #[arg(value_enum)]
        check: HeatCheck,
        #[arg(long)]
        solution: PathBuf,
        /// Source measure `μ`.
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Initial datum `σ`.
        #[arg(long)]
        sigma: Option<PathBuf>,
        /// Truncation radius for `bounds`, base radius for `lower`.
        #[arg(long = "R")]
        r: Option<f64>,
        /// Target slope for `decay`; defaults to `-N/2`.
        #[arg(long, allow_hyphen_values = true)]
        slope: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HeatCheck {
    Bounds,
    Lower,
    Decay,
    Gradient,
}

#[derive(Args)]
struct SolveData {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Globals {
    seed: Option<u64>,
    tol: Option<f64>,
    out_dir: Option<PathBuf>,
}

impl Globals {
    fn emit(&self, path: Option<&Path>, content: &str) -> CliResult<()> {
        emit(path, self.out_dir.as_deref(), content)
    }

    /// Writes the report and turns a failed check into exit code 1.
    fn finish(&self, report: &VerificationReport, out: Option<&Path>) -> CliResult<()> {
        self.emit(out, &report.to_json())?;
        if report.pass {
            Ok(())
        } else {
            Err(CliError::Check(format!("{}: {}", report.check, report.status)))
        }
    }
}

fn main() -> ExitCode {
    let env = env_logger::Env::default().filter_or("PARAPOT_LOG", "error");
    env_logger::Builder::from_env(env).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("internal error: {e}");
            return ExitCode::from(3);
        }
    }
    let globals = Globals { seed: cli.seed, tol: cli.tol, out_dir: cli.out_dir };
    match run(cli.command, &globals) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn grid_arg(arg: &str) -> CliResult<GridSpec> {
    let g: GridSpec = json_arg(arg)?;
    g.validate()?;
    Ok(g)
}

fn optional_measure(path: Option<&Path>, dim: usize) -> CliResult<DiscreteMeasure> {
    match path {
        Some(p) => read_measure(p),
        None => Ok(DiscreteMeasure::zero(dim)),
    }
}

fn bisect_pair(v: &Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.as_ref().map(|b| (b[0], b[1]))
}

#[derive(Serialize)]
struct CapacityOutput {
    spec: CapacitySpec,
    cells: usize,
    volume: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    primal: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual: Option<Num>,
    gap: Num,
    iterations: usize,
    converged: bool,
}

fn run(command: Command, g: &Globals) -> CliResult<u8> {
    match command {
        Command::Potential(PotentialCmd::Eval { kind, alpha, p, r, delta, measure, points, random, out }) => {
            let mu = read_measure(&measure)?;
            let spec = PotentialSpec { alpha, p, r, delta, ..PotentialSpec::new(alpha) };
            spec.validate(mu.dim)?;
            let pts = match points {
                Some(path) => read_points(&path)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(0));
                    (0..random)
                        .map(|_| SpaceTimePoint::new((0..mu.dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-1.0..1.0)))
                        .collect()
                }
            };
            if let Some(bad) = pts.iter().find(|z| z.dim() != mu.dim) {
                return Err(CliError::Parse(format!("point of dimension {} for a measure of dimension {}", bad.dim(), mu.dim)));
            }
            let values = evaluate_many(kind.into(), &mu, &spec, &pts)?;
            g.emit(out.as_deref(), &points_csv(&pts, &values, "value"))?;
            Ok(0)
        }
        Command::Norm { spec, function, out } => {
            let spec: NormSpec = json_arg(&spec)?;
            let f = read_grid_function(&function)?;
            #[derive(Serialize)]
            struct NormOutput {
                spec: NormSpec,
                value: Num,
                #[serde(skip_serializing_if = "Option::is_none")]
                center: Option<SpaceTimePoint>,
                #[serde(skip_serializing_if = "Option::is_none")]
                radius: Option<f64>,
            }
            let output = if spec.morrey == Morrey::None {
                NormOutput { value: Num(lorentz_norm(&f, &spec)?), spec, center: None, radius: None }
            } else {
                let scan = lorentz_morrey_scan(&f, &spec)?;
                NormOutput { value: Num(scan.value), spec, center: Some(scan.center), radius: Some(scan.radius) }
            };
            g.emit(out.as_deref(), &serde_json::to_string_pretty(&output).expect("serializes"))?;
            Ok(0)
        }
        Command::Verify(a) => {
            let mu = read_measure(&a.measure)?;
            let need_grid = || -> CliResult<GridSpec> {
                grid_arg(a.grid.as_deref().ok_or_else(|| CliError::Parse("this check needs --grid".into()))?)
            };
            let report = match a.check {
                VerifyKind::GoodLambda => {
                    let spec: PotentialSpec = json_arg(&a.spec)?;
                    good_lambda_check(&mu, &spec, None, &Weight::uniform(&need_grid()?))?
                }
                VerifyKind::Equivalence => {
                    let spec: PotentialSpec = json_arg(&a.spec)?;
                    norm_equivalence_report(&mu, &spec, a.q, a.s, &Weight::uniform(&need_grid()?), a.acceptance)?
                }
                VerifyKind::ExpInt => {
                    let spec: PotentialSpec = json_arg(&a.spec)?;
                    let c = a.center.clone().unwrap_or_else(|| vec![0.0; mu.dim + 1]);
                    if c.len() != mu.dim + 1 {
                        return Err(CliError::Parse(format!("--center needs {} coordinates", mu.dim + 1)));
                    }
                    let cyl = ParabolicCylinder::centered(SpaceTimePoint::new(c[..mu.dim].to_vec(), c[mu.dim]), a.rho.unwrap_or(1.0))?;
                    exp_integrability_check(&mu, &spec, &cyl, &ExpIntegrabilityOptions::default())?
                }
                VerifyKind::WeakMap => {
                    let spec: PotentialSpec = json_arg(&a.spec)?;
                    weak_mapping_check(&mu, &spec, &WeakMapOptions::default())?
                }
                VerifyKind::Trace => {
                    let mut spec: CapacitySpec = json_arg(&a.spec)?;
                    if let Some(t) = g.tol {
                        spec = spec.with_tolerance(t);
                    }
                    let sets: SetInput = json_arg(a.sets.as_deref().ok_or_else(|| CliError::Parse("trace needs --sets".into()))?)?;
                    trace_constants(&mu, &spec, &sets.build()?, TraceOptions::default())?
                }
            };
            g.finish(&report, a.out.as_deref())?;
            Ok(0)
        }
        Command::Capacity { set, spec, solver, out } => {
            let mut spec: CapacitySpec = json_arg(&spec)?;
            spec.solver = match solver {
                SolverArg::Primal => SolverChoice::Primal,
                SolverArg::Dual => SolverChoice::Dual,
                SolverArg::Both => SolverChoice::Both,
            };
            if let Some(t) = g.tol {
                spec = spec.with_tolerance(t);
            }
            let sets: SetInput = json_arg(&set)?;
            let family = sets.build()?;
            let mut outputs = Vec::with_capacity(family.len());
            for s in &family {
                let est = solve_capacity(s, &spec)?;
                outputs.push(CapacityOutput {
                    spec: spec.clone(),
                    cells: s.len(),
                    volume: s.volume(),
                    primal: matches!(solver, SolverArg::Primal | SolverArg::Both).then_some(Num(est.primal)),
                    dual: matches!(solver, SolverArg::Dual | SolverArg::Both).then_some(Num(est.dual)),
                    gap: Num(est.gap()),
                    iterations: est.iterations,
                    converged: est.converged,
                });
            }
            g.emit(out.as_deref(), &serde_json::to_string_pretty(&outputs).expect("serializes"))?;
            Ok(0)
        }
        Command::Heat(HeatCmd::Solve { problem, out }) => {
            let pr: HeatProblem = json_arg(&problem)?;
            let u = solve(&pr)?;
            g.emit(out.as_deref(), &SampledSolution::from_grid(&u).to_csv())?;
            Ok(0)
        }
        Command::Heat(HeatCmd::Verify { check, solution, measure, sigma, r, slope, out }) => {
            let u = read_solution(&solution)?;
            let dim = u.dim();
            let mu = optional_measure(measure.as_deref(), dim)?;
            let sigma = optional_measure(sigma.as_deref(), dim)?;
            let report = match check {
                HeatCheck::Bounds => {
                    let r = match r {
                        Some(r) => r,
                        None => {
                            let grid = u.to_grid()?.grid;
                            2.0 * (grid.diameter() + (grid.t1 - grid.t0).max(0.0).sqrt())
                        }
                    };
                    verify_two_sided_bounds(&u, &mu, &sigma, r)?
                }
                HeatCheck::Lower => verify_lower_bound(&u, &mu, r.unwrap_or(1.0))?,
                HeatCheck::Decay => {
                    let mut target = DecayTarget::heat(dim);
                    if let Some(s) = slope {
                        target.slope = s;
                    }
                    if let Some(t) = g.tol {
                        target = target.with_tol(t);
                    }
                    let mass = sigma.abs().total_mass();
                    verify_decay(&u, target, (mass > 0.0).then_some(mass))?
                }
                HeatCheck::Gradient => gradient_bound_check(&u.to_grid()?, &mu)?,
            };
            g.finish(&report, out.as_deref())?;
            Ok(0)
        }
        Command::Riccati { data, q, bisect } => {
            let grid = grid_arg(&data.grid)?;
            let mu = read_measure(&data.measure)?;
            let sigma = optional_measure(data.sigma.as_deref(), mu.dim)?;
            let mut cfg = IterationConfig::new(IterationMode::Riccati, q).with_max_iters(data.max_iters);
            if let Some(t) = g.tol {
                cfg = cfg.with_tol(t);
            }
            let (u, mut report) = riccati_solve(&mu, &sigma, &cfg, &grid)?;
            if let Some((lo, hi)) = bisect_pair(&bisect) {
                let b = bisect_threshold(lo, hi, 0.01, |s| Ok(riccati_solve(&mu.scaled(s), &sigma.scaled(s), &cfg, &grid)?.1.status == "converged"))?;
                report.set_constant("threshold_lo", b.lo);
                report.set_constant("threshold_hi", b.hi);
            }
            g.emit(data.out.as_deref(), &SampledSolution::from_grid(&u).to_csv())?;
            g.finish(&report, data.report.as_deref())?;
            Ok(0)
        }
        Command::LaneEmden { data, mode, q } => {
            let grid = grid_arg(&data.grid)?;
            let mu = read_measure(&data.measure)?;
            let sigma = optional_measure(data.sigma.as_deref(), mu.dim)?;
            let m = match mode {
                LaneEmdenMode::Absorption => IterationMode::LaneEmdenAbsorption,
                LaneEmdenMode::Source => IterationMode::LaneEmdenSource,
            };
            let cfg = IterationConfig::new(m, q).with_max_iters(data.max_iters);
            let (u, report) = lane_emden_solve(&mu, &sigma, &cfg, &grid)?;
            g.emit(data.out.as_deref(), &SampledSolution::from_grid(&u).to_csv())?;
            g.finish(&report, data.report.as_deref())?;
            Ok(0)
        }
        Command::Picard { f, k, q, spec, max_iters, bisect, out, report } => {
            let f = read_grid_function(&f)?;
            let spec: PotentialSpec = json_arg(&spec)?;
            let mut cfg = IterationConfig::new(IterationMode::Potential, q).with_k(k).with_max_iters(max_iters);
            if let Some(t) = g.tol {
                cfg = cfg.with_tol(t);
            }
            let (u, mut rep) = picard_potential_iteration(&f, &spec, &cfg)?;
            if let Some((lo, hi)) = bisect_pair(&bisect) {
                let b = bisect_threshold(lo, hi, 0.01, |s| Ok(picard_potential_iteration(&f.map(|v| v * s), &spec, &cfg)?.1.status == "converged"))?;
                rep.set_constant("threshold_lo", b.lo);
                rep.set_constant("threshold_hi", b.hi);
            }
            g.emit(out.as_deref(), &SampledSolution::from_grid(&u).to_csv())?;
            g.finish(&rep, report.as_deref())?;
            Ok(0)
        }
        Command::Campaign { config, builtin } => {
            let (cfg, base) = match config {
                Some(path) => {
                    let cfg = load_config(&path)?;
                    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                    (cfg, base)
                }
                None => {
                    debug_assert!(builtin);
                    (acceptance_campaign(g.seed.unwrap_or(0)), PathBuf::from("."))
                }
            };
            let cfg = campaign::CampaignConfig { tol: g.tol.or(cfg.tol), seed: g.seed.unwrap_or(cfg.seed), ..cfg };
            let out_dir = g.out_dir.clone();
            let run = run_campaign(&cfg, &base, out_dir.as_deref())?;
            if out_dir.is_none() && cfg.out_dir.is_none() {
                io::print_stdout(&serde_json::to_string_pretty(&run.index).expect("index serializes"));
            }
            Ok(run.index.exit_code() as u8)
        }
    }
}
