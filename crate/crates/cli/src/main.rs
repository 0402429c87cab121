//! `fluidchain` command-line front end.

mod config;
mod parse;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use fluidchain::chain::short_hash;
use fluidchain::export::{
    write_contour, write_drift, write_field_grid, write_flows, write_kappa, write_scaling, write_sweep, write_trajectory, Provenance,
};
use fluidchain::scaling::KappaParams;
use fluidchain::{
    branch_flow, drift_check, ensemble_experiment, field_grid, integrate_flow, kappa_diagnostics, simulate, stability_sweep, vec2,
    Base, ChainConfig, DriftCheck, ErrorClass, FieldKind, GridSpec, KappaCheck, Mat2, PathMode, Proposal, RateFunction,
    ScalingExperiment, TargetDensity, Vec2, VectorField,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fluidchain", version, about = "Random-walk Metropolis chains and their fluid limits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one chain and write its trajectory.
    Simulate(SimulateArgs),
    /// Monte Carlo drift against the limiting fields on a grid.
    Field(FieldArgs),
    /// Integrate the fluid ODE from one point.
    Flow(FlowArgs),
    /// Hitting times of the fluid ODE from directions on the unit circle.
    Sweep(SweepArgs),
    /// Scaled-path ensembles compared to the fluid limit.
    Scale(ScaleArgs),
    /// Empirical drift condition at growing radii.
    DriftCheck(DriftArgs),
    /// Stopping-time diagnostics for diagonal starts of mixtures.
    Kappa(KappaArgs),
    /// Rate sequence r_φ(0..n).
    Rates(RatesArgs),
    /// Log-density on a grid.
    Contour(ContourArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Flat key=value file; flags on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the effective settings as a config file.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "FLUIDCHAIN_THREADS")]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct Model {
    /// Density key with optional parameters, e.g. `gauss-mixture:a=4,alpha=0.5`.
    #[arg(long, value_parser = parse::density)]
    density: TargetDensity,
    /// `gaussian` or `ball:<radius>`.
    #[arg(long, default_value = "gaussian", value_parser = parse::base)]
    proposal: Base,
    /// Scale `s` (Σ = s²I) or the entries `s11,s12,s22` of Σ.
    #[arg(long, default_value = "1", value_parser = parse::shape, allow_hyphen_values = true)]
    sigma: Mat2,
}

impl Model {
    fn proposal(&self) -> Result<Proposal, Failure> {
        Ok(Proposal::new(self.proposal, self.sigma)?)
    }
}

#[derive(Args)]
struct Grid {
    #[arg(long, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long, allow_hyphen_values = true)]
    ymin: f64,
    #[arg(long, allow_hyphen_values = true)]
    ymax: f64,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
}

impl Grid {
    fn spec(&self) -> GridSpec {
        GridSpec {
            xmin: self.xmin,
            xmax: self.xmax,
            ymin: self.ymin,
            ymax: self.ymax,
            nx: self.nx,
            ny: self.ny,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    H,
    DeltaInf,
}

impl From<Field> for FieldKind {
    fn from(f: Field) -> Self {
        match f {
            Field::H => FieldKind::H,
            Field::DeltaInf => FieldKind::DeltaInfinity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Step,
    Polygonal,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, value_parser = parse::point, allow_hyphen_values = true)]
    x0: Vec2,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    step_cap: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    model: Model,
    #[command(flatten)]
    grid: Grid,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, value_parser = parse::point, allow_hyphen_values = true)]
    x0: Vec2,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, value_enum, default_value = "h")]
    field: Field,
    /// Integrate both perturbed branches from a point on the singular cone.
    #[arg(long)]
    branch: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 20.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, value_enum, default_value = "h")]
    field: Field,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    model: Model,
    /// Starting direction `x`; chains start at `r·x`.
    #[arg(long, value_parser = parse::point, allow_hyphen_values = true)]
    x0: Vec2,
    #[arg(long, value_parser = parse::positive_list)]
    r_values: parse::List,
    #[arg(long, default_value_t = 3.0)]
    t_max: f64,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    /// Time-scaling exponent; defaults to the density's β.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    step_cap: Option<usize>,
    /// Track κ stopping times with this δ.
    #[arg(long)]
    kappa_delta: Option<f64>,
    #[arg(long, default_value_t = 10.0, requires = "kappa_delta")]
    kappa_radius: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DriftArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, value_parser = parse::positive_list)]
    x_norms: parse::List,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long)]
    rho: Option<f64>,
    /// `T` in the budget `⌈T|x|^{1+β}⌉`.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Starting directions as angles in radians.
    #[arg(long, value_parser = parse::list, allow_hyphen_values = true)]
    angles: Option<parse::List>,
    #[arg(long)]
    step_cap: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct KappaArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_parser = parse::positive_list)]
    x_norms: parse::List,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    budget_factor: Option<f64>,
    #[arg(long)]
    step_cap: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RatesArgs {
    /// `poly:<alpha>` or `table:v/phi,v/phi,...`.
    #[arg(long, value_parser = parse::phi)]
    phi: RateFunction,
    #[arg(long)]
    n: usize,
    /// Invert H_φ numerically even when a closed form exists.
    #[arg(long)]
    numeric: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ContourArgs {
    #[arg(long, value_parser = parse::density)]
    density: TargetDensity,
    #[command(flatten)]
    grid: Grid,
    #[command(flatten)]
    common: Common,
}

struct Failure {
    class: ErrorClass,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Config,
            message: message.into(),
        }
    }

    fn code(&self) -> u8 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Budget => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self.class {
            ErrorClass::Config => "config",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Budget => "budget",
        }
    }
}

impl From<fluidchain::Error> for Failure {
    fn from(e: fluidchain::Error) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("io: {e}"))
    }
}

/// Rendered artifact plus an optional failure to report after writing it.
struct Output {
    bytes: Vec<u8>,
    after: Option<Failure>,
}

impl From<Vec<u8>> for Output {
    fn from(bytes: Vec<u8>) -> Self {
        Self { bytes, after: None }
    }
}

struct Run<'a> {
    common: &'a Common,
    hash: String,
}

impl Run<'_> {
    fn seed(&self) -> Result<u64, Failure> {
        self.common.seed.ok_or_else(|| Failure::config("--seed is required for randomized commands"))
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.hash.clone(), self.common.seed)
    }

    fn csv_only(&self, name: &str) -> Result<(), Failure> {
        match self.common.format {
            Format::Csv => Ok(()),
            Format::Json => Err(Failure::config(format!("`{name}` has no JSON output"))),
        }
    }

    fn render<F>(&self, json: &impl Serialize, csv: F) -> Result<Vec<u8>, Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        match self.common.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, json).map_err(|e| Failure::config(format!("json: {e}")))?;
                buf.push(b'\n');
            }
            Format::Csv => csv(&mut buf)?,
        }
        Ok(buf)
    }
}

fn directions(angles: &[f64]) -> Vec<Vec2> {
    angles.iter().map(|a| vec2(a.cos(), a.sin())).collect()
}

fn execute(cmd: &Cmd, run: &Run) -> Result<Output, Failure> {
    match cmd {
        Cmd::Simulate(a) => {
            run.csv_only("simulate")?;
            let mut cfg = ChainConfig::new(a.model.density, a.model.proposal()?, a.x0, run.seed()?, a.steps);
            if let Some(cap) = a.step_cap {
                cfg.step_cap = cap;
            }
            let traj = simulate(&cfg)?;
            let mut buf = Vec::new();
            write_trajectory(&mut buf, &traj)?;
            Ok(buf.into())
        }
        Cmd::Field(a) => {
            run.csv_only("field")?;
            let rows = field_grid(&a.model.density, &a.model.proposal()?, &a.grid.spec(), a.mc_samples, run.seed()?)?;
            let mut buf = Vec::new();
            write_field_grid(&mut buf, &run.provenance(), &rows)?;
            Ok(buf.into())
        }
        Cmd::Flow(a) => {
            run.csv_only("flow")?;
            let field = VectorField::new(a.model.density, a.model.proposal()?, a.field.into())?;
            let paths = if a.branch {
                let (plus, minus) = branch_flow(&field, &a.x0, a.dt, a.t_max)?;
                vec![plus, minus]
            } else {
                vec![integrate_flow(&field, &a.x0, a.dt, a.t_max)?]
            };
            let mut buf = Vec::new();
            write_flows(&mut buf, &run.provenance(), &paths)?;
            Ok(buf.into())
        }
        Cmd::Sweep(a) => {
            let field = VectorField::new(a.model.density, a.model.proposal()?, a.field.into())?;
            let report = stability_sweep(&field, a.directions, a.rho, a.t_max, a.dt)?;
            let buf = run.render(&report, |b| write_sweep(b, &run.provenance(), &report))?;
            Ok(buf.into())
        }
        Cmd::Scale(a) => {
            let mut exp = ScalingExperiment::new(
                a.model.density,
                a.model.proposal()?,
                a.x0,
                a.r_values.0.clone(),
                a.t_max,
                a.replicas,
                run.seed()?,
            );
            if let Some(v) = a.alpha {
                exp.alpha = v;
            }
            if let Some(v) = a.eps {
                exp.eps = v;
            }
            if let Some(v) = a.rho {
                exp.rho = v;
            }
            if let Some(m) = a.mode {
                exp.mode = match m {
                    Mode::Step => PathMode::Step,
                    Mode::Polygonal => PathMode::Polygonal,
                };
            }
            if let Some(v) = a.dt {
                exp.dt = v;
            }
            if let Some(v) = a.step_cap {
                exp.step_cap = v;
            }
            exp.kappa = a.kappa_delta.map(|delta| KappaParams {
                delta,
                radius: a.kappa_radius,
            });
            let report = ensemble_experiment(&exp)?;
            let bytes = run.render(&report, |b| write_scaling(b, &report))?;
            let after = report.cells.iter().find(|c| !c.completed).map(|c| Failure {
                class: ErrorClass::Budget,
                message: format!("r={} needs {} steps, above the step cap {}", c.r, c.required_steps, exp.step_cap),
            });
            Ok(Output { bytes, after })
        }
        Cmd::DriftCheck(a) => {
            let mut cfg = DriftCheck::new(a.model.density, a.model.proposal()?, a.x_norms.0.clone(), a.replicas, run.seed()?);
            if let Some(v) = a.rho {
                cfg.rho = v;
            }
            if let Some(v) = a.horizon {
                cfg.horizon = v;
            }
            if let Some(v) = a.p {
                cfg.p = v;
            }
            if let Some(angles) = &a.angles {
                cfg.directions = directions(&angles.0);
            }
            if let Some(v) = a.step_cap {
                cfg.step_cap = v;
            }
            let report = drift_check(&cfg)?;
            Ok(run.render(&report, |b| write_drift(b, &report))?.into())
        }
        Cmd::Kappa(a) => {
            let mut cfg = KappaCheck::new(a.model.density, a.model.proposal()?, a.delta, a.x_norms.0.clone(), a.replicas, run.seed()?);
            if let Some(v) = a.radius {
                cfg.radius = v;
            }
            if let Some(v) = a.budget_factor {
                cfg.budget_factor = v;
            }
            if let Some(v) = a.step_cap {
                cfg.step_cap = v;
            }
            let report = kappa_diagnostics(&cfg)?;
            Ok(run.render(&report, |b| write_kappa(b, &report))?.into())
        }
        Cmd::Rates(a) => {
            let seq = if a.numeric { a.phi.rate_sequence_numeric(a.n)? } else { a.phi.rate_sequence(a.n)? };
            let buf = run.render(&seq, |b| {
                writeln!(b, "{}", run.provenance().header())?;
                let line: Vec<String> = seq.iter().map(f64::to_string).collect();
                writeln!(b, "{}", line.join(","))
            })?;
            Ok(buf.into())
        }
        Cmd::Contour(a) => {
            run.csv_only("contour")?;
            let grid = a.grid.spec();
            grid.validate()?;
            let mut buf = Vec::new();
            write_contour(&mut buf, &run.provenance(), &a.density, &grid)?;
            Ok(buf.into())
        }
    }
}

fn common(cmd: &Cmd) -> &Common {
    match cmd {
        Cmd::Simulate(a) => &a.common,
        Cmd::Field(a) => &a.common,
        Cmd::Flow(a) => &a.common,
        Cmd::Sweep(a) => &a.common,
        Cmd::Scale(a) => &a.common,
        Cmd::DriftCheck(a) => &a.common,
        Cmd::Kappa(a) => &a.common,
        Cmd::Rates(a) => &a.common,
        Cmd::Contour(a) => &a.common,
    }
}

/// Writes through a sibling temporary file so a failed run never leaves a
/// truncated artifact behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn report(f: &Failure) -> ExitCode {
    let message = serde_json::to_string(&f.message).unwrap_or_default();
    eprintln!("error kind={} code={} message={message}", f.kind(), f.code());
    ExitCode::from(f.code())
}

fn run(argv: Vec<OsString>) -> Result<Option<Failure>, Failure> {
    let command = Cli::command();
    let argv = config::merge(&command, argv).map_err(|e| Failure::config(e.0))?;
    let matches = match command.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(None);
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return Err(Failure::config(line.trim_start_matches("error: ").to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::config(e.to_string()))?;
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = command.find_subcommand(name).expect("parsed subcommand exists");
    let settings = config::effective(sub, sub_matches, &["out", "format", "threads"]);
    let common = common(&cli.command);

    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    if let Some(path) = &common.save_config {
        write_atomic(path, settings.as_bytes())?;
    }

    let run = Run {
        common,
        hash: short_hash(format!("{name}\n{settings}").as_bytes()),
    };
    let out = execute(&cli.command, &run)?;
    match &common.out {
        Some(path) => write_atomic(path, &out.bytes)?,
        None => match std::io::stdout().write_all(&out.bytes) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(out.after)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => report(&f),
    }
}
