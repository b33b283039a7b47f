//! Command-line driver: `simulate`, `analyze` and `scenarios`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid flags or input rows,
//! 3 every simulation cell failed, 4 the curve could not be fitted.

mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

pub use report::{analyze_dataset, AnalysisOptions, AnalysisReport, ArmSummary, CurvePoint, FitSummary, ReportProvenance, CURVE_STEP};

use crate::error::{Error, Result};
use crate::fp_model::{FpAlgorithm, Record, TrialDataset};
use crate::inference::{BootstrapConfig, IntervalKind, Method};
use crate::mc_engine::{run_simulation, SimulationConfig};
use crate::rng::RngStream;
use crate::scenarios::{generate_dataset, true_curve, true_optimal, ScenarioId, TrialDesign, SCENARIO_RANGE};
use crate::targets::{EstimationTarget, Frontier};

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ALL_FAILED: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "durations", version, about = "Duration-response analysis for multi-arm duration trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo operating characteristics over scenarios and methods.
    Simulate(SimulateArgs),
    /// Analyse a `duration,cure` CSV and recommend a duration.
    Analyze(AnalyzeArgs),
    /// Emit true curves, true optimal durations or a simulated dataset.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SimulateArgs {
    /// JSON file with any of these options; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Scenario ids, e.g. `1-16` or `1,4,9`.
    #[arg(long)]
    scenarios: Option<String>,
    /// Total patients per simulated trial.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated arm durations in days.
    #[arg(long)]
    arms: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated method ids.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    boot_m: Option<usize>,
    #[arg(long)]
    fp: Option<String>,
    #[arg(long)]
    interval: Option<IntervalArg>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    jackknife_groups: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    contiguous: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum IntervalArg {
    Bca,
    Percentile,
}

impl From<IntervalArg> for IntervalKind {
    fn from(v: IntervalArg) -> Self {
        match v {
            IntervalArg::Bca => IntervalKind::Bca,
            IntervalArg::Percentile => IntervalKind::Percentile,
        }
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// CSV with header `duration,cure`, one row per patient.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "boot-duration")]
    method: String,
    /// Defaults to `risk-diff:0.10`, or to the `--frontier` knots if given.
    #[arg(long)]
    target: Option<String>,
    /// Frontier knots `D=loss,...` drawn on the curve.
    #[arg(long)]
    frontier: Option<String>,
    #[arg(long, default_value_t = 500)]
    boot_m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "exact2")]
    fp: String,
    #[arg(long)]
    interval: Option<IntervalArg>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    contiguous: bool,
    /// Ignore columns other than `duration` and `cure`.
    #[arg(long)]
    lax: bool,
    /// Directory for `report.json` and `curve.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Truth,
    Optima,
    Dataset,
}

#[derive(Debug, Args)]
struct ScenariosArgs {
    #[arg(long, value_enum)]
    emit: Emit,
    #[arg(long, default_value = "risk-diff:0.10")]
    target: String,
    /// Grid step in days for `truth`.
    #[arg(long, default_value_t = 0.1)]
    grid: f64,
    /// Scenario ids; `dataset` needs exactly one.
    #[arg(long, default_value = "1-16")]
    scenarios: String,
    /// Patients for `dataset`.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `1-16`, `1,4,9` or mixtures such as `1-3,7`.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioId>> {
    let bad = || Error::InvalidConfig(format!("bad scenario list '{text}'"));
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let v: u32 = part.parse().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        for id in lo..=hi {
            let id = ScenarioId::new(id)?;
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
    }
    Ok(ids)
}

fn parse_arms(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidDesign(format!("bad arm duration '{s}'")))
        })
        .collect()
}

fn parse_methods(text: &str) -> Result<Vec<Method>> {
    text.split(',').map(|s| s.trim().parse()).collect()
}

fn parse_frontier(text: &str) -> Result<Frontier> {
    match format!("frontier:{text}").parse::<EstimationTarget>()? {
        EstimationTarget::Frontier { frontier } => Ok(frontier),
        _ => unreachable!(),
    }
}

fn merge(flags: SimulateArgs, file: SimulateArgs) -> SimulateArgs {
    SimulateArgs {
        config: None,
        scenarios: flags.scenarios.or(file.scenarios),
        n: flags.n.or(file.n),
        arms: flags.arms.or(file.arms),
        reps: flags.reps.or(file.reps),
        method: flags.method.or(file.method),
        target: flags.target.or(file.target),
        boot_m: flags.boot_m.or(file.boot_m),
        fp: flags.fp.or(file.fp),
        interval: flags.interval.or(file.interval),
        level: flags.level.or(file.level),
        jackknife_groups: flags.jackknife_groups.or(file.jackknife_groups),
        contiguous: flags.contiguous || file.contiguous,
        seed: flags.seed.or(file.seed),
        workers: flags.workers.or(file.workers),
        out: flags.out.or(file.out),
    }
}

fn simulation_config(args: &SimulateArgs) -> Result<SimulationConfig> {
    let scenarios = parse_scenarios(args.scenarios.as_deref().unwrap_or("1-16"))?;
    let n = args.n.unwrap_or(500);
    let design = match &args.arms {
        Some(a) => TrialDesign::new(parse_arms(a)?, n)?,
        None => TrialDesign::standard_with_n(n),
    };
    let target: EstimationTarget = args.target.as_deref().unwrap_or("risk-diff:0.10").parse()?;
    let methods = match &args.method {
        Some(m) => parse_methods(m)?,
        None if target.is_gradient() => vec![Method::GradientPoint],
        None => vec![Method::BootDuration],
    };
    let mut bootstrap = BootstrapConfig::default();
    if let Some(m) = args.boot_m {
        bootstrap.m = m;
    }
    if let Some(fp) = &args.fp {
        bootstrap.fp = fp.parse::<FpAlgorithm>()?;
    }
    bootstrap.interval = args.interval.map(Into::into);
    if let Some(level) = args.level {
        bootstrap.level = level;
    }
    if let Some(g) = args.jackknife_groups {
        bootstrap.jackknife_groups = g;
    }
    bootstrap.contiguous = args.contiguous;
    let config = SimulationConfig {
        scenarios,
        design,
        methods,
        target,
        reps: args.reps.unwrap_or(1000),
        bootstrap,
        seed: args.seed.unwrap_or(1),
        workers: args.workers,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(flags: SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let file = match &flags.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => SimulateArgs::default(),
    };
    let args = merge(flags, file);
    let config = simulation_config(&args)?;
    let summary = match run_simulation(&config) {
        Ok(s) => s,
        Err(Error::AllReplicatesFailed) => return Ok(EXIT_ALL_FAILED),
        Err(e) => return Err(e),
    };
    let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    summary.write(&dir, &config)?;
    write!(out, "{}", summary.table())?;
    Ok(0)
}

/// Read a `duration,cure` CSV. Row numbers in errors count data rows from 1.
pub fn read_dataset_csv(path: &Path, lax: bool) -> Result<TrialDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(d_col), Some(c_col)) = (col("duration"), col("cure")) else {
        return Err(Error::MalformedRow {
            row: 0,
            message: "header must contain `duration` and `cure`".into(),
        });
    };
    if !lax && headers.len() != 2 {
        return Err(Error::MalformedRow {
            row: 0,
            message: "unexpected extra columns (use --lax to ignore them)".into(),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::MalformedRow { row: row_no, message: e.to_string() })?;
        let field = |c: usize| row.get(c).unwrap_or("");
        let duration: f64 = field(d_col).parse().map_err(|_| Error::MalformedRow {
            row: row_no,
            message: format!("duration '{}' is not a number", field(d_col)),
        })?;
        let cure = match field(c_col) {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::MalformedRow {
                    row: row_no,
                    message: format!("cure must be 0 or 1, got '{other}'"),
                })
            }
        };
        records.push(Record { duration, cure });
    }
    TrialDataset::new(records)
}

pub fn write_dataset_csv(dataset: &TrialDataset) -> String {
    let mut out = String::from("duration,cure\n");
    for r in &dataset.records {
        let _ = writeln!(out, "{},{}", r.duration, r.cure);
    }
    out
}

fn cmd_analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<i32> {
    let method: Method = args.method.parse()?;
    let frontier = args.frontier.as_deref().map(parse_frontier).transpose()?;
    let target = match (&args.target, &frontier) {
        (Some(t), _) => t.parse()?,
        (None, Some(f)) => EstimationTarget::Frontier { frontier: f.clone() },
        (None, None) => EstimationTarget::risk_difference(0.10),
    };
    let bootstrap = BootstrapConfig {
        m: args.boot_m,
        interval: args.interval.map(Into::into),
        level: args.level,
        contiguous: args.contiguous,
        fp: args.fp.parse()?,
        ..BootstrapConfig::default()
    };
    bootstrap.validate()?;
    if !method.supports(&target) {
        return Err(Error::UnsupportedTarget {
            method: method.to_string(),
            target: target.to_string(),
        });
    }
    let dataset = read_dataset_csv(&args.data, args.lax)?;
    let opts = AnalysisOptions {
        method,
        target,
        bootstrap,
        seed: args.seed,
        frontier,
    };
    let report = analyze_dataset(&dataset, &opts)?;
    assert!(report.is_consistent(), "report recommendation does not follow from its own tables");
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(args.out.join("curve.csv"), report.curve_csv())?;
    writeln!(out, "recommended_duration={}", report.recommended_duration)?;
    Ok(0)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "not-attained".to_string(), |x| format!("{x:.digits$}"))
}

fn cmd_scenarios(args: ScenariosArgs, out: &mut dyn Write) -> Result<i32> {
    let ids = parse_scenarios(&args.scenarios)?;
    let design = TrialDesign::standard_with_n(args.n);
    let mut text = String::new();
    match args.emit {
        Emit::Truth => {
            if !(args.grid > 0.0) {
                return Err(Error::InvalidConfig("grid step must be positive".into()));
            }
            let (lo, hi) = SCENARIO_RANGE;
            let steps = ((hi - lo) / args.grid + 1e-9).floor() as usize;
            text.push_str("scenario,duration,prob\n");
            for id in ids {
                for k in 0..=steps {
                    let d = lo + k as f64 * args.grid;
                    let _ = writeln!(text, "{},{:.4},{:.6}", id, d, true_curve(id, d)?);
                }
            }
        }
        Emit::Optima => {
            let target: EstimationTarget = args.target.parse()?;
            text.push_str("scenario,target,d_star,d_star_grid,optimal_integer\n");
            for id in ids {
                let t = true_optimal(id, &target, &design);
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    id,
                    csv_field(&target.to_string()),
                    fmt_opt(t.d_star, 4),
                    fmt_opt(t.d_star_grid, 3),
                    t.d_star_integer.map_or("not-attained".to_string(), |d| d.to_string()),
                );
            }
        }
        Emit::Dataset => {
            let [id] = ids[..] else {
                return Err(Error::InvalidConfig("--emit dataset needs exactly one scenario".into()));
            };
            let data = generate_dataset(id, &design, RngStream::new(args.seed))?;
            text = write_dataset_csv(&data);
        }
    }
    emit(&text, args.out.as_deref(), out)?;
    Ok(0)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

fn exit_code(err: &Error, analyzing: bool) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::AllReplicatesFailed => EXIT_ALL_FAILED,
        Error::NoConvergedFit | Error::Unidentifiable { .. } | Error::SingularInformation | Error::BootstrapExhausted
            if analyzing =>
        {
            EXIT_FIT
        }
        _ => EXIT_USAGE,
    }
}

/// Run the CLI with explicit output streams; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let analyzing = matches!(cli.command, Command::Analyze(_));
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Scenarios(a) => cmd_scenarios(a, out),
    };
    match result {
        Ok(code) => {
            if code == EXIT_ALL_FAILED {
                let _ = writeln!(err, "error: every simulation cell failed");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e, analyzing)
        }
    }
}

/// Run the CLI on the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
