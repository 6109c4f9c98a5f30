use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use confgeo::checks::{self, Suite, SuiteOptions, SuiteReport};
use confgeo::geometry::{lift, ConformalFactor, MetricSpec};
use confgeo::hamiltonian::arclength_jet;
use confgeo::integrate::{linspace, Method, Settings};
use confgeo::io::{self, InitialData, MetricConfig, RunConfig};
use confgeo::oracles::{to_sphere, OracleCurve};
use confgeo::trajectory::{Metadata, Trajectory};
use confgeo::variational::{
    bvp_shoot, first_variation_fd, first_variation_formula, stationarity_check, BvpProblem, BvpSettings, VariationField,
    DEFAULT_SAMPLES, DEFAULT_VARIATION_STEP,
};
use confgeo::Error;

#[derive(Parser)]
#[command(name = "confgeo", version, about = "Conformal geodesics and the fourth-order Mercator equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a curve equation and write the trajectory.
    Integrate(IntegrateArgs),
    /// Sample a closed-form oracle curve.
    Oracle(OracleArgs),
    /// Run a verification suite and write a pass/fail report.
    Check(CheckArgs),
    /// Compare the first-variation formula with finite differences.
    Vary(VaryArgs),
    /// Solve a two-point boundary value problem by shooting.
    Bvp(BvpArgs),
    /// Write the three Figure 1 curves and their shape summary.
    Figure1(Figure1Args),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct MetricArgs {
    /// Metric kind (e.g. flat-euclidean, round-sphere-stereographic), a JSON file, or inline JSON.
    #[arg(long)]
    metric: Option<String>,
    /// Dimension for named metrics; defaults to the length of the initial position.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Absolute and relative tolerance (default: CONFGEO_DEFAULT_TOL or 1e-10).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "rkf45")]
    method: String,
    /// Fixed step for rk4, initial step for rkf45.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// cg3, mercator4, geodesic or arclength.
    #[arg(long, default_value = "cg3")]
    equation: String,
    /// Initial data "x;U[;A[;J]]" with comma-separated components.
    #[arg(long)]
    ic: Option<String>,
    /// First integral C for mercator4, used in place of J.
    #[arg(long, allow_hyphen_values = true)]
    c_vector: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t1: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// A complete run configuration (JSON file or inline) replacing the flags above.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    /// Oracle curve as JSON, e.g. {"kind":"circle","x0":[0,0,0],"u0":[1,0,0],"a0":[0,1,0]}.
    #[arg(long)]
    curve: String,
    /// Metric used for the covariant U, A, J columns (default flat).
    #[command(flatten)]
    metric: MetricArgs,
    /// Write the stereographic image on the unit sphere instead.
    #[arg(long)]
    embed_sphere: bool,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t1: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    /// invariance, first-integrals, tractor, theorem1 or hamiltonian.
    suite: String,
    /// Conformal factor for the invariance suite (default 2/(1+|x|^2)).
    #[arg(long)]
    factor: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random states for the invariance suite.
    #[arg(long)]
    states: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct VaryArgs {
    /// Oracle curve as JSON.
    #[arg(long)]
    curve: String,
    /// Variation field as JSON, e.g. {"bump":{"a":0.1,"b":0.6,"dir":[0,0,1]}}; omit to run the stationarity panel.
    #[arg(long)]
    field: Option<String>,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t1: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Finite-difference step in the variation parameter.
    #[arg(long, default_value_t = DEFAULT_VARIATION_STEP)]
    variation_step: f64,
    /// Stationarity threshold for the panel.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BvpArgs {
    /// Problem JSON: {"t0","t1","x0","u0","x1","u1"} plus optional "metric", "guess" and "settings".
    problem: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Where to write the solver trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct Figure1Args {
    /// Output directory for figure1_{red,blue,green}.csv and figure1.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    t1: f64,
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[arg(long)]
    tol: Option<f64>,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

/// Inline JSON (starting with `{`) or the path of a JSON file.
fn read_json<T: serde::de::DeserializeOwned>(src: &str, what: &str) -> CliResult<T> {
    let text = if src.trim_start().starts_with('{') {
        src.to_string()
    } else {
        std::fs::read_to_string(src).map_err(|e| input(format!("cannot read {what} {src:?}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| input(format!("invalid {what}: {e}")))
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, content).map_err(|e| input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn metric_config(args: &MetricArgs, fallback_dim: Option<usize>, default_kind: &str) -> CliResult<MetricConfig> {
    let src = args.metric.as_deref().unwrap_or(default_kind);
    if src.trim_start().starts_with('{') || src.ends_with(".json") {
        let cfg: MetricConfig = read_json(src, "metric")?;
        if let Some(d) = args.dim.filter(|d| *d != cfg.dim) {
            return Err(input(format!("--dim {d} contradicts the metric's dim {}", cfg.dim)));
        }
        return Ok(cfg);
    }
    let dim = args.dim.or(fallback_dim).unwrap_or(3);
    Ok(MetricConfig::named(src, dim))
}

fn settings(args: &SolverArgs) -> CliResult<Settings> {
    let tol = match args.tol {
        Some(t) => t,
        None => io::default_tol()?,
    };
    let method: Method = args.method.parse()?;
    let mut s = match method {
        Method::Rkf45 => Settings::rkf45(tol),
        Method::Rk4 => {
            Settings::rk4(args.step.ok_or_else(|| input("--method rk4 needs --step"))?)
        }
    };
    if method == Method::Rkf45 {
        s.step = args.step;
    }
    if let Some(m) = args.max_steps {
        s.max_steps = m;
    }
    Ok(s)
}

fn run_config(args: &RunArgs) -> CliResult<Option<RunConfig>> {
    if let Some(src) = &args.config {
        let cfg: RunConfig = read_json(src, "run configuration")?;
        cfg.validate()?;
        return Ok(Some(cfg));
    }
    let Some(ic) = &args.ic else { return Ok(None) };
    let mut initial = InitialData::parse(ic)?;
    if let Some(c) = &args.c_vector {
        initial.c = Some(io::parse_vector(c)?);
    }
    let cfg = RunConfig {
        metric: metric_config(&args.metric, Some(initial.x.len()), "flat-euclidean")?,
        equation: args.equation.clone(),
        initial,
        t0: args.t0,
        t1: args.t1,
        samples: args.samples,
        settings: settings(&args.solver)?,
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

fn integrate(args: IntegrateArgs) -> CliResult<()> {
    let cfg = run_config(&args.run)?.ok_or_else(|| input("integrate needs --ic or --config"))?;
    let traj = cfg.run()?;
    let text = match args.format {
        Format::Csv => io::trajectory_csv(&traj),
        Format::Json => io::trajectory_json(&traj, &cfg),
    };
    write_output(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct OracleConfig<'a> {
    curve: &'a OracleCurve,
    metric: &'a MetricConfig,
    embed_sphere: bool,
    t0: f64,
    t1: f64,
    samples: usize,
}

fn sample_oracle(curve: &OracleCurve, metric: &MetricSpec, embed: bool, times: &[f64]) -> confgeo::Result<Trajectory> {
    let n = curve.dim();
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let d = curve.derivatives(t)?;
        if embed {
            states.push(to_sphere(&d[0]).as_slice().to_vec());
            continue;
        }
        let jet = arclength_jet(metric, d[0].as_slice())?;
        let cov = lift::covariant_from_coordinates(&jet, &d[1..4])?;
        states.push([&d[0], &cov[0], &cov[1], &cov[2]].iter().flat_map(|v| v.iter().copied()).collect());
    }
    Ok(Trajectory {
        dim: if embed { n + 1 } else { n },
        fields: if embed { vec!["y".into()] } else { ["x", "U", "A", "J"].map(String::from).to_vec() },
        times: times.to_vec(),
        states,
        meta: Metadata {
            metric: metric.name().to_string(),
            equation: "oracle".into(),
            method: "closed-form".into(),
            atol: 0.0,
            rtol: 0.0,
            stats: Default::default(),
        },
    })
}

fn oracle(args: OracleArgs) -> CliResult<()> {
    let curve: OracleCurve = read_json(&args.curve, "oracle curve")?;
    curve.validate()?;
    let mcfg = metric_config(&args.metric, Some(curve.dim()), "flat-euclidean")?;
    let metric = mcfg.build()?;
    if metric.dim() != curve.dim() {
        return Err(Error::DimensionMismatch { expected: metric.dim(), got: curve.dim() }.into());
    }
    if args.samples < 2 || !(args.t1 > args.t0) {
        return Err(input("need samples >= 2 and t1 > t0"));
    }
    let times = linspace(args.t0, args.t1, args.samples);
    let traj = sample_oracle(&curve, &metric, args.embed_sphere, &times)?;
    let cfg = OracleConfig {
        curve: &curve,
        metric: &mcfg,
        embed_sphere: args.embed_sphere,
        t0: args.t0,
        t1: args.t1,
        samples: args.samples,
    };
    let text = match args.format {
        Format::Csv => io::trajectory_csv(&traj),
        Format::Json => io::trajectory_json(&traj, &cfg),
    };
    write_output(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct CheckConfig {
    suite: String,
    seed: u64,
    states: Option<usize>,
    metric: Option<MetricConfig>,
    factor: Option<String>,
    run: Option<RunConfig>,
}

fn report_csv(r: &SuiteReport) -> String {
    let mut out = String::from("check,value,comparison,tolerance,passed\n");
    for c in &r.checks {
        out.push_str(&format!(
            "\"{}\",{},{},{},{}\n",
            c.name.replace('"', "\"\""),
            io::fmt_f64(c.value),
            c.comparison,
            io::fmt_f64(c.tolerance),
            c.passed
        ));
    }
    out
}

fn check(args: CheckArgs) -> CliResult<bool> {
    let suite: Suite = args.suite.parse()?;
    let run = run_config(&args.run)?;
    let metric = match (&args.run.metric.metric, &run) {
        (Some(_), _) => Some(metric_config(&args.run.metric, None, "flat-euclidean")?),
        (None, Some(r)) => Some(r.metric.clone()),
        (None, None) => None,
    };
    let factor = args.factor.as_deref().map(ConformalFactor::parse).transpose()?;
    let opts = SuiteOptions {
        metric: metric.as_ref().map(MetricConfig::build).transpose()?,
        factor,
        run: run.clone(),
        states: args.states,
        seed: args.seed,
    };
    let report = checks::run_suite(suite, &opts)?;
    let cfg = CheckConfig { suite: args.suite, seed: args.seed, states: args.states, metric, factor: args.factor, run };
    let text = match args.format {
        Format::Json => io::report_json(&report, &cfg),
        Format::Csv => report_csv(&report),
    };
    write_output(args.out.as_deref(), &text)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {:e} (needs {} {:e})", c.name, c.value, c.comparison, c.tolerance);
    }
    Ok(report.passed)
}

#[derive(Serialize)]
struct VaryConfig<'a> {
    curve: &'a OracleCurve,
    field: &'a Option<VariationField>,
    metric: &'a MetricConfig,
    t0: f64,
    t1: f64,
    samples: usize,
    variation_step: f64,
}

#[derive(Serialize)]
struct VaryReport {
    integral: f64,
    boundary: f64,
    k_integral: f64,
    formula: f64,
    finite_difference: f64,
    absolute_error: f64,
    relative_error: f64,
    quadrature_error: f64,
}

fn vary(args: VaryArgs) -> CliResult<()> {
    let curve: OracleCurve = read_json(&args.curve, "oracle curve")?;
    curve.validate()?;
    let field: Option<VariationField> = args.field.as_deref().map(|f| read_json(f, "variation field")).transpose()?;
    let mcfg = metric_config(&args.metric, Some(curve.dim()), "flat-euclidean")?;
    let metric = mcfg.build()?;
    let cfg = VaryConfig {
        curve: &curve,
        field: &field,
        metric: &mcfg,
        t0: args.t0,
        t1: args.t1,
        samples: args.samples,
        variation_step: args.variation_step,
    };
    let text = match &field {
        Some(v) => {
            let f = first_variation_formula(&metric, &curve, v, args.t0, args.t1, args.samples)?;
            let d = first_variation_fd(&metric, &curve, v, args.t0, args.t1, args.samples, args.variation_step)?;
            let err = (f.total() - d.value).abs();
            let report = VaryReport {
                integral: f.integral,
                boundary: f.boundary,
                k_integral: f.k_integral,
                formula: f.total(),
                finite_difference: d.value,
                absolute_error: err,
                relative_error: err / d.value.abs(),
                quadrature_error: f.quadrature_error,
            };
            io::report_json(&report, &cfg)
        }
        None => io::report_json(&stationarity_check(&metric, &curve, args.t0, args.t1, args.tol)?, &cfg),
    };
    write_output(args.out.as_deref(), &text)
}

#[derive(Clone, Serialize, Deserialize)]
struct Guess {
    a0: Vec<f64>,
    j0: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct BvpFile {
    #[serde(default)]
    metric: Option<MetricConfig>,
    #[serde(flatten)]
    problem: BvpProblem,
    #[serde(default)]
    guess: Option<Guess>,
    #[serde(default)]
    settings: Option<BvpSettings>,
}

#[derive(Serialize)]
struct BvpDocument<'a> {
    config_hash: String,
    a0: &'a [f64],
    j0: &'a [f64],
    iterations: usize,
    residual: f64,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn bvp(args: BvpArgs) -> CliResult<()> {
    let file: BvpFile = read_json(&args.problem, "boundary value problem")?;
    let n = file.problem.dim();
    let mcfg = file.metric.clone().unwrap_or_else(|| MetricConfig::named("flat-euclidean", n));
    let metric = mcfg.build()?;
    let guess = file.guess.as_ref().map(|g| (DVector::from_column_slice(&g.a0), DVector::from_column_slice(&g.j0)));
    let settings = file.settings.clone().unwrap_or_default();
    let sol = bvp_shoot(&metric, &file.problem, guess, &settings)?;
    if let Some(p) = &args.trace {
        write_output(Some(p), &io::trace_csv(&sol.trace))?;
    }
    let text = match args.format {
        Format::Csv => io::trajectory_csv(&sol.trajectory),
        Format::Json => {
            let doc = BvpDocument {
                config_hash: io::config_hash(&file),
                a0: &sol.a0,
                j0: &sol.j0,
                iterations: sol.iterations,
                residual: sol.residual,
                columns: sol.trajectory.columns(),
                rows: sol
                    .trajectory
                    .times
                    .iter()
                    .zip(&sol.trajectory.states)
                    .map(|(t, y)| std::iter::once(*t).chain(y.iter().copied()).collect())
                    .collect(),
            };
            serde_json::to_string_pretty(&doc).expect("solution serialises") + "\n"
        }
    };
    write_output(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct Figure1Config {
    x: [f64; 3],
    u: [f64; 3],
    a: [f64; 3],
    t1: f64,
    samples: usize,
    settings: Settings,
}

fn figure1(args: Figure1Args) -> CliResult<bool> {
    let tol = match args.tol {
        Some(t) => t,
        None => io::default_tol()?,
    };
    if args.samples < 3 || !(args.t1 > 0.0) {
        return Err(input("figure1 needs samples >= 3 and t1 > 0"));
    }
    let settings = Settings::rkf45(tol);
    let runs = checks::figure1(args.t1, args.samples, &settings)?;
    std::fs::create_dir_all(&args.out).map_err(|e| input(format!("cannot create {}: {e}", args.out.display())))?;
    for r in &runs {
        let path = args.out.join(format!("figure1_{}.csv", r.colour));
        write_output(Some(&path), &io::trajectory_csv(&r.trajectory))?;
    }
    let mut report = SuiteReport::new("figure1");
    let by = |c: &str| runs.iter().find(|r| r.colour == c).expect("three runs");
    for r in &runs {
        report.at_most(&format!("C drift, {}", r.colour), r.c_drift, 1e-6);
    }
    report.at_most("red: distance from a circle", by("red").circle_deviation, 1e-8);
    report.at_most("blue: distance from the initial osculating plane", by("blue").plane_deviation, 1e-8);
    report.at_least("blue: distance from a circle", by("blue").circle_deviation, 1e-3);
    report.at_least("green: max |torsion|", by("green").max_abs_torsion, 1e-3);
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        report: &'a SuiteReport,
        runs: &'a [checks::Figure1Run],
    }
    let cfg = Figure1Config {
        x: checks::FIGURE1_X,
        u: checks::FIGURE1_U,
        a: checks::FIGURE1_A,
        t1: args.t1,
        samples: args.samples,
        settings,
    };
    let text = io::report_json(&Summary { report: &report, runs: &runs }, &cfg);
    write_output(Some(&args.out.join("figure1.json")), &text)?;
    for c in &report.checks {
        println!("{} {}: {:e}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Integrate(a) => integrate(a).map(|_| true),
        Command::Oracle(a) => oracle(a).map(|_| true),
        Command::Check(a) => check(a),
        Command::Vary(a) => vary(a).map(|_| true),
        Command::Bvp(a) => bvp(a).map(|_| true),
        Command::Figure1(a) => figure1(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
