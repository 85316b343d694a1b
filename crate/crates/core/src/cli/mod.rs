//! `drsub` command-line interface.
//!
//! Exit codes: 0 success, 1 I/O or run failure, 2 validation.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{
    apply_override, AlgorithmSpec, BoundSpec, ConstantOverrides, ExperimentConfig, NoiseSpec, OptSpec,
    ProblemKind, ProblemSpec, ReportSpec,
};

use crate::analysis::{
    approx_opt, bound_violation_rate, shared_c1_refit, trajectory_statistic, Series, Statistic,
    TrialBattery,
};
use crate::bounds::{BoundConstants, BoundCurve, Certifies};
use crate::error::{Error, Result};
use crate::objectives::{
    synthetic_bipartite, write_bipartite_tsv, BudgetAllocationObjective, BudgetOptions, ConstraintFill,
    FrequencyMapping, NqpGenerator, Objective, Problem, SyntheticBipartite,
};
use crate::optimizers::{run_battery, write_battery_csv, write_returns_csv, RunRecord};
use crate::oracle::NoiseModel;

pub const BATTERY_FILE: &str = "battery.csv";
pub const RETURNS_FILE: &str = "returns.csv";
pub const CONSTANTS_FILE: &str = "constants.toml";
pub const REPORT_FILE: &str = "report.toml";
pub const PARTIAL_MARKER: &str = ".partial";

#[derive(Debug, Parser)]
#[command(name = "drsub", version, about = "Stochastic continuous DR-submodular maximization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a problem instance.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Execute a battery of runs.
    Run(ConfigArgs),
    /// Evaluate the selected lower bounds over t = 1..T.
    Bounds(ConfigArgs),
    /// Trajectory statistics, fits and bound-violation rates.
    Report(ReportArgs),
    /// run, bounds and report in sequence.
    Pipeline(ConfigArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Random quadratic instance with non-positive Hessian.
    Nqp(GenerateNqpArgs),
    /// Random bipartite channel/customer frequency file.
    Budget(GenerateBudgetArgs),
}

#[derive(Debug, Args)]
pub struct GenerateNqpArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub low: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub high: f64,
    /// Use this value for every constraint entry instead of Uniform[0, 1].
    #[arg(long)]
    pub constraint_value: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "instance.toml")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateBudgetArgs {
    #[arg(long)]
    pub channels: usize,
    #[arg(long)]
    pub customers: usize,
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    #[arg(long, default_value_t = 10)]
    pub max_frequency: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "edges.tsv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override any config key, e.g. `--set noise.sigma=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Battery CSV to read instead of the one in the output directory.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// Bound CSVs to check instead of those selected in the config.
    #[arg(long = "bound")]
    pub bounds: Vec<PathBuf>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = Vec::new();
        if let Some(v) = self.runs {
            overrides.push(format!("runs={v}"));
        }
        if let Some(v) = self.iterations {
            overrides.push(format!("iterations={v}"));
        }
        if let Some(v) = self.seed {
            overrides.push(format!("master_seed={v}"));
        }
        if let Some(v) = self.threads {
            overrides.push(format!("threads={v}"));
        }
        overrides.extend(self.set.iter().cloned());
        let mut cfg = ExperimentConfig::load(&self.config, &overrides)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::Csv(_)
        | Error::ProjectionDiverged { .. }
        | Error::LpCycling(_)
        | Error::LpUnbounded
        | Error::PowerIterationDiverged(_) => 1,
        _ => 2,
    }
}

/// An error with the exit code it should produce.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            code: exit_code(&error),
            error,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

pub fn execute(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Generate(GenerateCommand::Nqp(a)) => generate_nqp(&a)?,
        Command::Generate(GenerateCommand::Budget(a)) => generate_budget(&a)?,
        Command::Run(a) => {
            let cfg = a.load()?;
            cmd_run(&cfg)?;
        }
        Command::Bounds(a) => {
            let cfg = a.load()?;
            cmd_bounds(&cfg)?;
        }
        Command::Report(a) => {
            let cfg = a.config.load()?;
            cmd_report(&cfg, a.battery.as_deref(), &a.bounds)?;
        }
        Command::Pipeline(a) => {
            let cfg = a.load()?;
            cmd_run(&cfg)?;
            cmd_bounds(&cfg)?;
            cmd_report(&cfg, None, &[])?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_problem_constants<O: Objective + ?Sized>(objective: &O) -> Result<()> {
    println!("L = {}", objective.smoothness_bound()?);
    println!("D = {}", objective.polytope().diameter_bound());
    Ok(())
}

pub fn generate_nqp(a: &GenerateNqpArgs) -> Result<()> {
    let mut generator = NqpGenerator::new(a.n, a.m, a.low, a.high);
    if let Some(c) = a.constraint_value {
        generator = generator.with_fill(ConstraintFill::Constant(c));
    }
    let objective = generator.generate(a.seed)?;
    write_text(&a.out, &objective.to_toml_string())?;
    println!("wrote {}", a.out.display());
    print_problem_constants(&objective)
}

pub fn generate_budget(a: &GenerateBudgetArgs) -> Result<()> {
    let spec = SyntheticBipartite {
        channels: a.channels,
        customers: a.customers,
        density: a.density,
        max_frequency: a.max_frequency,
    };
    let edges = synthetic_bipartite(a.seed, &spec)?;
    write_bipartite_tsv(&a.out, &edges)?;
    println!("wrote {} ({} edges)", a.out.display(), edges.len());
    let objective = BudgetAllocationObjective::from_frequencies(
        a.channels,
        a.customers,
        &edges,
        FrequencyMapping::Exponential,
        &BudgetOptions::default(),
    )?;
    print_problem_constants(&objective)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Executes the battery and writes `battery.csv` and `returns.csv`. On a
/// run failure a `.partial` marker is left in the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> std::result::Result<Vec<RunRecord>, Failure> {
    let problem = cfg.problem.build()?;
    let noise = cfg.noise_model()?;
    let mut template = cfg.run_config()?;
    template.keep_iterates = false;
    create_dir(&cfg.output_dir)?;
    let marker = cfg.output_dir.join(PARTIAL_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let records = match run_battery(&problem, noise, &template, cfg.runs, cfg.threads) {
        Ok(r) => r,
        Err(e) => {
            let _ = fs::write(&marker, format!("battery aborted: {e}\n"));
            return Err(Failure { code: 1, error: e });
        }
    };
    write_battery_csv(&cfg.output_dir.join(BATTERY_FILE), &records)?;
    write_returns_csv(&cfg.output_dir.join(RETURNS_FILE), &records)?;
    let mut returned: Vec<f64> = records.iter().map(|r| r.returned_value).collect();
    returned.sort_by(f64::total_cmp);
    let median = Statistic::Median.apply(&mut returned.clone());
    println!(
        "{} runs of {} (T = {}): returned min = {} median = {} max = {}",
        records.len(),
        template.algorithm,
        template.iterations,
        returned[0],
        median,
        returned[returned.len() - 1]
    );
    Ok(records)
}

/// Constants feeding the bounds, as written to `constants.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    pub dimension: usize,
    pub lipschitz: f64,
    pub diameter: f64,
    /// Infinite when the noise is not almost surely bounded.
    pub noise_bound: f64,
    /// Absent for state-dependent noise without a gradient-norm bound.
    pub sigma: Option<f64>,
    pub grad0_norm: f64,
    pub opt: f64,
    /// `config` or `approx_opt`.
    pub opt_source: String,
}

impl ConstantsFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    fn bound_constants(&self) -> BoundConstants {
        BoundConstants {
            lipschitz: self.lipschitz,
            diameter: self.diameter,
            noise_bound: self.noise_bound,
            sigma: self.sigma.unwrap_or(f64::NAN),
            opt: self.opt,
            grad0_norm: self.grad0_norm,
        }
    }
}

pub fn compute_constants(cfg: &ExperimentConfig, problem: &Problem, noise: NoiseModel) -> Result<ConstantsFile> {
    let o = &cfg.constants;
    let n = problem.dim();
    let (noise_bound, sigma) = match noise.constants(n, cfg.noise.g_max) {
        Ok(c) => (c.noise_bound, Some(c.sigma)),
        Err(Error::MissingConstant(_)) => (f64::INFINITY, None),
        Err(e) => return Err(e),
    };
    let lipschitz = match o.lipschitz {
        Some(v) => v,
        None => problem.smoothness_bound()?,
    };
    let grad0_norm = match o.grad0_norm {
        Some(v) => v,
        None => problem.gradient(&nalgebra::DVector::zeros(n))?.norm(),
    };
    let (opt, opt_source) = match cfg.opt.value {
        Some(v) => (v, "config"),
        None => {
            let opt_noise = if cfg.opt.noise_free { NoiseModel::none() } else { noise };
            let v = approx_opt(
                problem,
                opt_noise,
                cfg.opt.runs,
                cfg.opt.iterations,
                cfg.opt_seed(),
                cfg.threads,
            )?;
            (v, "approx_opt")
        }
    };
    Ok(ConstantsFile {
        dimension: n,
        lipschitz,
        diameter: o.diameter.unwrap_or_else(|| problem.polytope().diameter_bound()),
        noise_bound: o.noise_bound.unwrap_or(noise_bound),
        sigma: o.sigma.or(sigma),
        grad0_norm,
        opt,
        opt_source: opt_source.into(),
    })
}

fn bound_file(dir: &Path, theorem: u8) -> PathBuf {
    dir.join(format!("bound_theorem{theorem}.csv"))
}

/// Writes `constants.toml` and one `bound_theoremN.csv` per selected bound.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundCurve>> {
    let gamma = cfg.algorithm.gamma.unwrap_or(1.0);
    let theorems = cfg
        .bounds
        .iter()
        .map(|b| b.theorem(gamma))
        .collect::<Result<Vec<_>>>()?;
    for (i, t) in theorems.iter().enumerate() {
        if theorems[..i].iter().any(|u| u.id() == t.id()) {
            return Err(Error::invalid(format!("theorem{} selected twice", t.id())));
        }
    }
    let problem = cfg.problem.build()?;
    let noise = cfg.noise_model()?;
    let consts = compute_constants(cfg, &problem, noise)?;
    for t in &theorems {
        if t.needs_noise_bound() && !consts.noise_bound.is_finite() {
            return Err(Error::MissingConstant(format!(
                "theorem{}: bounded-noise constant M unavailable (noise is not almost surely bounded)",
                t.id()
            )));
        }
        if t.needs_sigma() && consts.sigma.is_none() {
            return Err(Error::MissingConstant(format!(
                "theorem{}: state-dependent noise: supply G_max",
                t.id()
            )));
        }
    }
    create_dir(&cfg.output_dir)?;
    let text = toml::to_string(&consts).map_err(|e| Error::invalid(format!("constants: {e}")))?;
    write_text(&cfg.output_dir.join(CONSTANTS_FILE), &text)?;
    let c = consts.bound_constants();
    let header = format!(
        "L={} D={} M={} sigma={} grad0_norm={} opt={}",
        c.lipschitz, c.diameter, c.noise_bound, c.sigma, c.grad0_norm, c.opt
    );
    let mut curves = Vec::new();
    for t in &theorems {
        let curve = t.curve(&c, cfg.iterations)?;
        let path = bound_file(&cfg.output_dir, t.id());
        curve.write_csv(&path, &[t.describe(), header.clone()])?;
        println!(
            "{}: bound at T = {} is {}",
            path.display(),
            cfg.iterations,
            curve.last().map(|p| p.value).unwrap_or(f64::NAN)
        );
        curves.push(curve);
    }
    Ok(curves)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub algorithm: String,
    pub runs: usize,
    pub iterations: u64,
    pub series: String,
    pub normalized: bool,
    pub opt: Option<f64>,
    pub fit: FitSection,
    #[serde(default)]
    pub violations: Vec<ViolationEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub p: f64,
    pub t_min: u64,
    pub c1_shared: f64,
    pub curves: Vec<CurveFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub label: String,
    pub c1_individual: f64,
    pub c2_individual: f64,
    /// Refit with the shared `c1`.
    pub c2: f64,
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationEntry {
    pub theorem: u8,
    pub certifies: String,
    pub bound_at_t: f64,
    pub rate: f64,
}

impl Report {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

fn report_opt(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    if let Some(v) = cfg.opt.value {
        return Ok(Some(v));
    }
    let path = cfg.output_dir.join(CONSTANTS_FILE);
    if path.exists() {
        return ConstantsFile::read(&path).map(|c| Some(c.opt));
    }
    Ok(None)
}

/// Reads the battery (and bound CSVs), writes `stat_<label>.csv` files and
/// `report.toml`.
pub fn cmd_report(cfg: &ExperimentConfig, battery: Option<&Path>, bound_paths: &[PathBuf]) -> Result<Report> {
    let battery_path = battery
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(BATTERY_FILE));
    let raw = TrialBattery::read_csv(&battery_path)?;
    let opt = report_opt(cfg)?;
    let shown = if cfg.report.normalized {
        let opt = opt.ok_or_else(|| {
            Error::MissingConstant("OPT unavailable: run the bounds command first or set opt.value".into())
        })?;
        raw.normalized(opt)?
    } else {
        raw.clone()
    };
    let series = cfg.series()?;
    create_dir(&cfg.output_dir)?;
    let mut curves = Vec::new();
    for label in &cfg.report.statistics {
        let curve = trajectory_statistic(&shown, Statistic::parse(label)?, series)?;
        curve.write_csv(&cfg.output_dir.join(format!("stat_{}.csv", curve.label)))?;
        curves.push(curve);
    }
    let fit = shared_c1_refit(&curves, cfg.report.p, cfg.report.t_min)?;

    let bound_paths: Vec<PathBuf> = if bound_paths.is_empty() {
        cfg.bounds
            .iter()
            .map(|b| bound_file(&cfg.output_dir, b.theorem))
            .filter(|p| p.exists())
            .collect()
    } else {
        bound_paths.to_vec()
    };
    let mut violations = Vec::new();
    for path in &bound_paths {
        let bound = BoundCurve::read_csv(path)?;
        violations.push(ViolationEntry {
            theorem: bound.theorem,
            certifies: match bound.certifies {
                Certifies::AverageIterate => "average_iterate".into(),
                Certifies::FinalIterate => "final_iterate".into(),
            },
            bound_at_t: bound.last().map(|p| p.value).unwrap_or(f64::NAN),
            rate: bound_violation_rate(&raw, &bound)?,
        });
    }

    let report = Report {
        algorithm: raw.algorithm().to_string(),
        runs: raw.len(),
        iterations: raw.iterations(),
        series: match series {
            Series::FTrue => "f_true".into(),
            Series::RunningAvg => "f_running_avg".into(),
        },
        normalized: cfg.report.normalized,
        opt,
        fit: FitSection {
            p: cfg.report.p,
            t_min: cfg.report.t_min,
            c1_shared: fit.c1_shared,
            curves: fit
                .individual
                .iter()
                .zip(&fit.refit)
                .map(|(ind, re)| CurveFit {
                    label: re.label.clone(),
                    c1_individual: ind.c1,
                    c2_individual: ind.c2,
                    c2: re.c2,
                    residual: re.residual,
                    n_points: re.n_points,
                })
                .collect(),
        },
        violations,
    };
    let text = toml::to_string(&report).map_err(|e| Error::invalid(format!("report: {e}")))?;
    write_text(&cfg.output_dir.join(REPORT_FILE), &text)?;
    println!("c1_shared = {}", report.fit.c1_shared);
    for c in &report.fit.curves {
        println!("{}: c2 = {}", c.label, c.c2);
    }
    for v in &report.violations {
        println!("theorem{} violation rate = {}", v.theorem, v.rate);
    }
    Ok(report)
}
