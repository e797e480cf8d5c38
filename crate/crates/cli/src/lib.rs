//! Command implementations shared by the `explorer`, `sle` and `analyze` binaries.
//!
//! Every command writes plain text (CSV, JSON or SVG) and is a pure function of its
//! arguments. Exit codes: 0 success, 2 usage or configuration, 3 runtime, 4 failed
//! criteria.

// guards like `!(x > 0.0)` reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hexplore::analysis;
use hexplore::conformal::{self, Metric};
use hexplore::experiment::{self, ConvergenceReport, ExperimentConfig};
use hexplore::explorer::{self, ExplorerPath};
use hexplore::lattice::{build_domain_approximation, JordanPolygon};
use hexplore::loewner::{self, DrivingFunction};
use hexplore::rng::stream_rng;
use thiserror::Error;

use crate::plot::{Chart, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {msg}")]
    Read { path: PathBuf, msg: String },
    #[error("cannot write {path}: {msg}")]
    Write { path: PathBuf, msg: String },
    #[error("{0}")]
    Runtime(String),
    #[error("{failed} of {total} criteria failed")]
    Criteria { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } => 2,
            CliError::Write { .. } | CliError::Runtime(_) => 3,
            CliError::Criteria { .. } => 4,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Flags accepted by every command.
#[derive(Args, Clone, Debug, Default)]
pub struct GlobalArgs {
    /// Worker threads for Monte Carlo commands (0 = one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Master seed; overrides the config seed where there is one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or directory for `analyze convergence`. Standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Runs a command and turns its result into a process exit code, reporting errors on stderr.
pub fn finish(result: Result<(), CliError>) -> std::process::ExitCode {
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code())
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_path_buf(), msg: e.to_string() })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), msg: e.to_string() })?;
    }
    fs::write(path, text).map_err(|e| CliError::Write { path: path.to_path_buf(), msg: e.to_string() })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_text(p, text),
        None => print_stdout(text),
    }
}

/// Writes to stdout; a closed pipe (as with `| head`) is not an error.
fn print_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Write { path: "<stdout>".into(), msg: e.to_string() })
        }
        _ => Ok(()),
    }
}

pub fn read_domain(path: &Path) -> Result<JordanPolygon, CliError> {
    let text = read_text(path)?;
    JordanPolygon::from_json(&text).map_err(|e| CliError::Read { path: path.to_path_buf(), msg: e.to_string() })
}

fn read_path(path: &Path) -> Result<ExplorerPath, CliError> {
    let text = read_text(path)?;
    ExplorerPath::from_csv(&text).map_err(|e| CliError::Read { path: path.to_path_buf(), msg: e.to_string() })
}

// ---------------------------------------------------------------- explorer

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    /// Re-solve the harmonic function after every step and compare with a uniform draw.
    Exact,
    /// Color each apex by a random walk to the colored set; same law, much faster.
    Walk,
}

#[derive(Args, Clone, Debug)]
pub struct SampleArgs {
    /// Domain JSON: `vertices`, marks `u0` and `ue`, optional `canonical`.
    #[arg(long)]
    pub domain: PathBuf,
    /// Lattice mesh ε.
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Sampler::Exact)]
    pub sampler: Sampler,
    /// Random stream of the walk sampler.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Solver tolerance of the exact sampler.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

/// `explorer sample`: writes the path CSV `index,x,y,kind` with an `# eps=… seed=…` header.
pub fn cmd_sample(args: &SampleArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let poly = read_domain(&args.domain)?;
    if !(args.eps > 0.0) {
        return Err(CliError::Usage(format!("--eps must be positive, got {}", args.eps)));
    }
    let dom = build_domain_approximation(&poly, args.eps).map_err(runtime)?;
    let seed = global.seed.unwrap_or(0);
    let path = match args.sampler {
        Sampler::Exact => explorer::sample_path(&dom, seed, args.tol),
        Sampler::Walk => explorer::sample_path_walk(&dom, seed, args.stream),
    }
    .map_err(runtime)?;
    emit(global.out.as_deref(), &path.to_csv())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    /// Zipper map of the grid domain boundary.
    Zipper,
    /// Closed form of the domain's `canonical` description.
    ClosedForm,
}

#[derive(Args, Clone, Debug)]
pub struct DriveArgs {
    #[arg(long)]
    pub domain: PathBuf,
    /// Path CSV written by `explorer sample`.
    #[arg(long)]
    pub path: PathBuf,
    /// Stop once this half-plane capacity is reached; the whole path when absent.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = MapKind::Zipper)]
    pub map: MapKind,
    /// Zipper sub-points per boundary edge.
    #[arg(long, default_value_t = 2)]
    pub subdivisions: usize,
}

/// `explorer drive`: maps a path to the half-plane and writes its driving CSV `t,W`.
pub fn cmd_drive(args: &DriveArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let poly = read_domain(&args.domain)?;
    let path = read_path(&args.path)?;
    let dom = build_domain_approximation(&poly, path.mesh).map_err(runtime)?;
    let map = match args.map {
        MapKind::Zipper => conformal::map_to_halfplane_zipper(&dom, args.subdivisions),
        MapKind::ClosedForm => conformal::map_to_halfplane_closed_form(&dom),
    }
    .map_err(runtime)?;
    let drv = conformal::path_driving(&map, &path, args.t_max.unwrap_or(f64::INFINITY)).map_err(runtime)?;
    emit(global.out.as_deref(), &drv.to_csv())
}

// ---------------------------------------------------------------- sle

#[derive(Args, Clone, Debug)]
pub struct TraceArgs {
    #[arg(long, default_value_t = 4.0)]
    pub kappa: f64,
    /// Capacity horizon T.
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Time step of the driving function.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Also write the sampled driving CSV here.
    #[arg(long)]
    pub driving_out: Option<PathBuf>,
}

/// `sle trace`: samples `W = sqrt(κ)·B` and writes the trace CSV `t,x,y`.
pub fn cmd_trace(args: &TraceArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let mut rng = stream_rng(global.seed.unwrap_or(0), 0);
    let drv = loewner::sample_driving(args.kappa, args.t_max, args.dt, &mut rng).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = &args.driving_out {
        write_text(p, &drv.to_csv())?;
    }
    emit(global.out.as_deref(), &loewner::solve_trace(&drv).to_csv())
}

// ---------------------------------------------------------------- analyze

#[derive(Args, Clone, Debug)]
pub struct ConvergenceArgs {
    /// Experiment config JSON; its `domain` path is relative to the config file.
    #[arg(long)]
    pub config: PathBuf,
}

/// Reads and validates a config, resolving its domain path against the config's directory.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, JordanPolygon), CliError> {
    let text = read_text(path)?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if cfg.domain.is_empty() {
        return Err(CliError::Usage(format!("{}: config has no domain", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let poly = read_domain(&base.join(&cfg.domain))?;
    Ok((cfg, poly))
}

/// Files written by `analyze convergence`, by name.
pub fn report_files(report: &ConvergenceReport) -> Vec<(&'static str, String)> {
    vec![
        ("report.json", report.to_json() + "\n"),
        ("variance.csv", report.variance_csv()),
        ("summary.csv", report.summary_csv()),
        ("modulus.csv", report.modulus_csv()),
        ("variance.svg", variance_chart(report).to_svg()),
        ("fits.svg", fits_chart(report).to_svg()),
    ]
}

fn variance_chart(report: &ConvergenceReport) -> Chart {
    let mut chart = Chart::new("Driving variance profile", "capacity t", "Var W(t)");
    let t_end = report.entries.iter().flat_map(|e| e.marginals.iter().map(|r| r.t)).fold(0.0, f64::max);
    chart = chart.with(Series::line("4t", vec![(0.0, 0.0), (t_end, 4.0 * t_end)]).dashed());
    for e in &report.entries {
        let mut pts = vec![(0.0, 0.0)];
        pts.extend(e.marginals.iter().map(|r| (r.t, r.var)));
        chart = chart.with(Series::line(format!("eps = {}", e.eps), pts));
    }
    chart
}

fn fits_chart(report: &ConvergenceReport) -> Chart {
    let mut chart = Chart::new("Error against mesh", "eps", "error").log_log();
    let eps: Vec<f64> = report.entries.iter().map(|e| e.eps).collect();
    let mut add = |name: &str, values: Vec<(f64, f64)>, fit: Option<&analysis::PowerLawFit>| {
        if values.is_empty() {
            return;
        }
        chart.series.push(Series::scatter(name.to_string(), values));
        if let Some(f) = fit {
            let line = eps.iter().map(|&e| (e, f.prefactor * e.powf(f.exponent))).collect();
            chart.series.push(Series::line(format!("slope {:.3}", f.exponent), line).dashed());
        }
    };
    add(
        "observable error",
        report.entries.iter().filter(|e| e.observable.n > 0).map(|e| (e.eps, e.observable.mean)).collect(),
        report.observable_fit.as_ref(),
    );
    add(
        "trace distance",
        report.entries.iter().filter(|e| e.trace_distance.n > 0).map(|e| (e.eps, e.trace_distance.mean)).collect(),
        report.trace_fit.as_ref(),
    );
    add("|var defect|", report.entries.iter().map(|e| (e.eps, e.moments.var_defect.abs())).collect(), report.moment_fit.as_ref());
    chart
}

/// `analyze convergence`: runs the experiment, writes the report files and prints one line per criterion.
///
/// Files go to `--out`, else the config's `out` (relative to the config), else the config's directory.
pub fn cmd_convergence(args: &ConvergenceArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let (mut cfg, poly) = load_config(&args.config)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    let base = args.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let dir = match (&global.out, &cfg.out) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => base,
    };
    let report = experiment::run_experiment(&cfg, &poly, global.threads).map_err(|e| match e {
        experiment::ExperimentError::Config(m) => CliError::Usage(m),
        other => runtime(other),
    })?;
    for (name, text) in report_files(&report) {
        write_text(&dir.join(name), &text)?;
    }
    let lines: String = report
        .criteria
        .iter()
        .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    print_stdout(&lines)?;
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Criteria { failed, total: report.criteria.len() });
    }
    Ok(())
}

/// `analyze exponents`: prints the exponent table as aligned text, then JSON.
pub fn cmd_exponents(global: &GlobalArgs) -> Result<(), CliError> {
    let table = analysis::optimize_exponents();
    let json = serde_json::to_string_pretty(&table).map_err(runtime)? + "\n";
    print_stdout(&format!("{}{json}", table.to_text()))?;
    if let Some(p) = &global.out {
        write_text(p, &json)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    /// Crosscuts that separate the tip from the target mark.
    Crosscut,
    /// Any return within δ of an earlier point.
    Revisit,
}

#[derive(Args, Clone, Debug)]
pub struct ModulusArgs {
    #[arg(long)]
    pub domain: PathBuf,
    /// Path CSV written by `explorer sample`.
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Measure::Crosscut)]
    pub measure: Measure,
    /// Metric of the revisit measure; `rho` measures the half-plane image of the path.
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    /// Cut the path where it first comes this fraction of the domain diameter near the target.
    #[arg(long, default_value_t = 0.1)]
    pub stop: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Rho,
}

/// `analyze modulus`: writes the structure modulus report JSON of one path.
pub fn cmd_modulus(args: &ModulusArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let poly = read_domain(&args.domain)?;
    let path = read_path(&args.path)?;
    if !(args.delta > 2.0 * path.mesh) {
        return Err(CliError::Usage(format!("--delta must exceed 2·eps = {}", 2.0 * path.mesh)));
    }
    let dom = build_domain_approximation(&poly, path.mesh).map_err(runtime)?;
    let curve = analysis::stop_near(&path.points, dom.ve_hat(), args.stop * dom.reference_diameter());
    let report = match (args.measure, args.metric) {
        (Measure::Crosscut, MetricArg::Euclidean) => {
            conformal::nested_bottleneck_modulus(curve, args.delta, &dom.boundary_polygon(), dom.ve_hat())
        }
        (Measure::Crosscut, MetricArg::Rho) => {
            return Err(CliError::Usage("the crosscut measure is Euclidean in the domain".into()));
        }
        (Measure::Revisit, MetricArg::Euclidean) => {
            conformal::tip_structure_modulus_in(curve, args.delta, Metric::Euclidean, &dom.boundary_polygon())
        }
        (Measure::Revisit, MetricArg::Rho) => {
            let map = conformal::map_to_halfplane(&dom).map_err(runtime)?;
            let image: Vec<_> = curve.iter().map(|&z| map.forward(z)).collect();
            conformal::tip_structure_modulus(&image, args.delta, Metric::Rho)
        }
    }
    .map_err(runtime)?;
    emit(global.out.as_deref(), &(report.to_json() + "\n"))
}

/// Reads a driving CSV; used by tests and scripts that post-process `explorer drive` output.
pub fn read_driving(path: &Path) -> Result<DrivingFunction, CliError> {
    let text = read_text(path)?;
    DrivingFunction::from_csv(&text).map_err(|e| CliError::Read { path: path.to_path_buf(), msg: e.to_string() })
}
