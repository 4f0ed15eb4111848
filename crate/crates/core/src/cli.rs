//! Command-line front end.
//!
//! Results go to stdout as single-line JSON or CSV; failures go to stderr as a
//! single-line JSON object `{"error": ..., "message": ...}`.
//!
//! Exit codes: 0 success, 2 usage error, 3 infeasible, 4 numeric domain error.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{independent_total, one_grab, sequential_total, BaselineReport};
use crate::bounds::{joint_lower_bound, BoundBreakdown};
use crate::demo::{generate_scene, run_demo, Geometry};
use crate::error::Error;
use crate::hypergeom::joint_success_exact;
use crate::model::{BoundVariant, DeltaBinomial, P0Form, PopulationSpec, Requirement};
use crate::montecarlo::{coverage_samples, empirical_quantile, estimate_success, repetition_seed, McEstimate};
use crate::sizing::{min_grab_size, McOptions, Method, SizingOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

/// Populations above this size skip exact probabilities in `prob`, `curve` and `compare`.
pub const EXACT_CLI_LIMIT: usize = 2000;

pub const CURVE_HEADER: &str = "p_target,r_bound,r_exact,r_mc_mean,r_mc_std";

#[derive(Debug, Parser)]
#[command(name = "onegrab", version, about = "Minimal one-time-grab sample sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimal grab size for a population and requirement.
    Minsize(MinsizeArgs),
    /// Bound breakdown, exact and simulated success probability at a given grab size.
    Prob(ProbArgs),
    /// Grab size against target confidence, as CSV or JSON rows.
    Curve(CurveArgs),
    /// Points touched by one grab against iterative samplers.
    Compare(CompareArgs),
    /// Synthetic line/plane recovery from a single grab.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct PopulationArgs {
    /// Total number of points N.
    #[arg(long)]
    population: usize,
    /// Size of every structure (with --structures).
    #[arg(long, requires = "structures", conflicts_with = "structure_sizes")]
    structure_size: Option<usize>,
    /// Number of equally sized structures (with --structure-size).
    #[arg(long, requires = "structure_size")]
    structures: Option<usize>,
    /// Comma-separated structure sizes.
    #[arg(long, value_delimiter = ',')]
    structure_sizes: Option<Vec<usize>>,
}

impl PopulationArgs {
    fn spec(&self) -> Result<PopulationSpec, Failure> {
        let sizes = match (&self.structure_sizes, self.structure_size, self.structures) {
            (Some(sizes), None, None) => sizes.clone(),
            (None, Some(size), Some(count)) => vec![size; count],
            _ => {
                return Err(Failure::usage(
                    "give either --structure-sizes or --structure-size with --structures",
                ))
            }
        };
        PopulationSpec::new(self.population, sizes).map_err(Failure::from)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum P0Arg {
    Paper,
    Safe,
    Exp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DeltaArg {
    Grab,
    Structure,
    Strict,
}

#[derive(Debug, Args)]
struct VariantArgs {
    #[arg(long, value_enum, default_value = "safe")]
    p0: P0Arg,
    #[arg(long, value_enum, default_value = "strict")]
    delta: DeltaArg,
}

impl VariantArgs {
    fn variant(&self) -> BoundVariant {
        let p0 = match self.p0 {
            P0Arg::Paper => P0Form::PaperLiteral,
            P0Arg::Safe => P0Form::Safe,
            P0Arg::Exp => P0Form::Exponential,
        };
        let delta = match self.delta {
            DeltaArg::Grab => DeltaBinomial::GrabChoose,
            DeltaArg::Structure => DeltaBinomial::StructureChoose,
            DeltaArg::Strict => DeltaBinomial::Strict,
        };
        BoundVariant::new(p0, delta)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Bound,
    Exact,
    Mc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bound => Method::Bound,
            MethodArg::Exact => Method::Exact,
            MethodArg::Mc => Method::MonteCarlo,
        }
    }
}

#[derive(Debug, Args)]
struct MinsizeArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// Minimal points per structure.
    #[arg(long)]
    dof: usize,
    #[arg(long)]
    confidence: f64,
    #[arg(long, value_enum, default_value = "bound")]
    method: MethodArg,
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ProbArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// Grab size.
    #[arg(long)]
    r: usize,
    #[arg(long)]
    dof: usize,
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Enables the Monte Carlo estimate.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, default_value_t = 2)]
    dof: usize,
    #[command(flatten)]
    variant: VariantArgs,
    /// Target confidences as lo:hi:step.
    #[arg(long, default_value = "0.90:0.99:0.01")]
    confidence_grid: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Coverage-time samples per estimate.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Independent estimates averaged per row.
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long)]
    dof: usize,
    #[arg(long)]
    confidence: f64,
    #[command(flatten)]
    variant: VariantArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeometryArg {
    Line2d,
    Plane3d,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, value_enum)]
    geometry: GeometryArg,
    /// Perpendicular noise sigma.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Inlier threshold; defaults to three times the noise.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Also write the scene as `x y [z] label` lines to this file.
    #[arg(long)]
    export: Option<std::path::PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, kind: "usage", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SizeViolation(_) | Error::EmptyStructures => EXIT_USAGE,
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_DOMAIN,
        };
        let kind = if code == EXIT_USAGE { "usage" } else { e.kind() };
        Self { code, kind, message: e.to_string() }
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: &'a str,
}

/// Runs the CLI against the process streams and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", error_json("usage", first));
            let _ = write!(err, "{rendered}");
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{}", error_json(f.kind, &f.message));
            f.code
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::to_string(&ErrorLine { error: kind, message }).expect("plain strings serialise")
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let line = serde_json::to_string(value).map_err(|e| Failure::from(Error::domain(e.to_string())))?;
    writeln!(out, "{line}").map_err(io_failure)
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure { code: 1, kind: "io", message: e.to_string() }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Minsize(args) => minsize(args, out),
        Command::Prob(args) => prob(args, out),
        Command::Curve(args) => curve(args, out),
        Command::Compare(args) => compare(args, out),
        Command::Demo(args) => demo(args, out),
    }
}

#[derive(Serialize)]
struct MinsizeOutput {
    r: usize,
    method: Method,
    achieved: f64,
    variant: Option<BoundVariant>,
    fallback_used: bool,
    evaluations: usize,
    exact_substituted: bool,
}

fn minsize(args: MinsizeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = args.population.spec()?;
    let req = Requirement::new(args.dof, args.confidence)?;
    let method = Method::from(args.method);
    let mc = match (method, args.seed) {
        (Method::MonteCarlo, None) => return Err(Failure::usage("--method mc requires --seed")),
        (_, seed) => seed.map(|seed| McOptions { trials: args.trials, seed }),
    };
    let options = SizingOptions { variant: args.variant.variant(), mc, ..Default::default() };
    let res = min_grab_size(&spec, &req, method, &options)?;
    emit_json(
        out,
        &MinsizeOutput {
            r: res.r,
            method: res.method,
            achieved: res.achieved,
            variant: res.variant,
            fallback_used: res.fallback_used,
            evaluations: res.evaluations,
            exact_substituted: res.exact_substituted,
        },
    )
}

#[derive(Serialize)]
struct ExactOutput {
    linear: f64,
    log_value: f64,
}

#[derive(Serialize)]
struct ProbOutput {
    r: usize,
    dof: usize,
    bound: BoundBreakdown,
    exact: Option<ExactOutput>,
    mc: Option<McEstimate>,
}

fn prob(args: ProbArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = args.population.spec()?;
    let bound = joint_lower_bound(&spec, args.dof, args.r, args.variant.variant())?;
    let exact = if spec.total_points() <= EXACT_CLI_LIMIT {
        let p = joint_success_exact(&spec, args.dof, args.r)?;
        Some(ExactOutput { linear: p.linear, log_value: p.log_value })
    } else {
        None
    };
    let mc = args
        .seed
        .map(|seed| estimate_success(&spec, args.dof, args.r, args.trials, seed))
        .transpose()?;
    emit_json(out, &ProbOutput { r: args.r, dof: args.dof, bound, exact, mc })
}

/// One row of the grab-size-versus-confidence curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub p_target: f64,
    pub r_bound: Option<usize>,
    pub r_exact: Option<usize>,
    pub r_mc_mean: f64,
    pub r_mc_std: f64,
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        let count = |v: Option<usize>| v.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            format_sig(self.p_target, 6),
            count(self.r_bound),
            count(self.r_exact),
            format_sig(self.r_mc_mean, 6),
            format_sig(self.r_mc_std, 6)
        )
    }
}

/// Parameters of the curve protocol.
#[derive(Debug, Clone, Copy)]
pub struct CurveConfig {
    pub variant: BoundVariant,
    pub trials: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Parses `lo:hi:step` into targets rounded to six significant digits.
pub fn parse_confidence_grid(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::domain(format!("bad confidence grid {text:?}: {e}")))?;
    let [lo, hi, step] = parts[..] else {
        return Err(Error::domain(format!("confidence grid must be lo:hi:step, got {text:?}")));
    };
    if !(lo > 0.0 && lo <= hi && hi < 1.0 && step > 0.0) {
        return Err(Error::domain(format!("confidence grid needs 0 < lo <= hi < 1 and step > 0, got {text:?}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| format_sig(lo + i as f64 * step, 6).parse().expect("formatted float parses"))
        .collect())
}

/// Computes curve rows: bound and exact grab sizes plus the mean and sample
/// standard deviation of `repeats` empirical-quantile estimates.
///
/// Every row reuses the same coverage-time samples, so the Monte Carlo
/// columns are non-decreasing in the target.
pub fn curve_rows(spec: &PopulationSpec, dof: usize, targets: &[f64], config: &CurveConfig) -> Result<Vec<CurveRow>, Error> {
    if config.trials == 0 || config.repeats == 0 {
        return Err(Error::domain("trials and repeats must be positive"));
    }
    let samples: Vec<Vec<usize>> = (0..config.repeats as u64)
        .map(|rep| {
            let mut s = coverage_samples(spec, dof, config.trials, repetition_seed(config.seed, rep))?;
            s.sort_unstable();
            Ok(s)
        })
        .collect::<Result<_, Error>>()?;
    let options = SizingOptions { variant: config.variant, ..Default::default() };
    targets
        .iter()
        .map(|&p| {
            let req = Requirement::new(dof, p)?;
            let r_bound = match min_grab_size(spec, &req, Method::Bound, &options) {
                Ok(res) => Some(res.r),
                Err(Error::Infeasible(_)) => None,
                Err(e) => return Err(e),
            };
            let r_exact = if spec.total_points() <= EXACT_CLI_LIMIT {
                Some(min_grab_size(spec, &req, Method::Exact, &options)?.r)
            } else {
                None
            };
            let estimates: Vec<f64> = samples.iter().map(|s| empirical_quantile(s, p) as f64).collect();
            let (mean, std) = mean_and_std(&estimates);
            Ok(CurveRow { p_target: p, r_bound, r_exact, r_mc_mean: mean, r_mc_std: std })
        })
        .collect()
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn curve(args: CurveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = args.population.spec()?;
    let targets = parse_confidence_grid(&args.confidence_grid)?;
    let config = CurveConfig {
        variant: args.variant.variant(),
        trials: args.trials,
        repeats: args.repeats,
        seed: args.seed,
    };
    let rows = curve_rows(&spec, args.dof, &targets, &config)?;
    match args.format {
        Format::Csv => {
            let mut text = String::from(CURVE_HEADER);
            text.push('\n');
            for row in &rows {
                text.push_str(&row.to_csv());
                text.push('\n');
            }
            out.write_all(text.as_bytes()).map_err(io_failure)
        }
        Format::Json => emit_json(out, &rows),
    }
}

/// Reports for the one-grab sizes and the iterative baselines, in output order.
pub fn comparison_reports(spec: &PopulationSpec, req: &Requirement, variant: BoundVariant) -> Result<Vec<BaselineReport>, Error> {
    let dof = req.dof();
    let options = SizingOptions { variant, ..Default::default() };
    let mut reports = Vec::new();
    match min_grab_size(spec, req, Method::Bound, &options) {
        Ok(res) => reports.push(one_grab("one_grab_bound", res.r, dof)),
        Err(Error::Infeasible(_)) if spec.check_feasible(dof).is_ok() => {}
        Err(e) => return Err(e),
    }
    if spec.total_points() <= EXACT_CLI_LIMIT {
        let res = min_grab_size(spec, req, Method::Exact, &options)?;
        reports.push(one_grab("one_grab_exact", res.r, dof));
    }
    if dof > 0 {
        reports.push(independent_total(spec, dof, req.confidence())?);
        reports.push(sequential_total(spec, dof, req.confidence())?);
    }
    Ok(reports)
}

fn compare(args: CompareArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = args.population.spec()?;
    let req = Requirement::new(args.dof, args.confidence)?;
    let reports = comparison_reports(&spec, &req, args.variant.variant())?;
    let mut text = String::from("method,hypotheses,points_touched\n");
    for r in &reports {
        text.push_str(&format!("{},{},{}\n", r.method_name, r.hypotheses, r.points_touched));
    }
    out.write_all(text.as_bytes()).map_err(io_failure)
}

fn demo(args: DemoArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = args.population.spec()?;
    let geometry = match args.geometry {
        GeometryArg::Line2d => Geometry::Line2d,
        GeometryArg::Plane3d => Geometry::Plane3d,
    };
    let method = Method::from(args.method);
    let req = Requirement::new(geometry.dof(), args.confidence)?;
    let mc = Some(McOptions { trials: args.trials, seed: args.seed });
    let sizing = min_grab_size(&spec, &req, method, &SizingOptions { mc, ..Default::default() })?;
    let scene = generate_scene(&spec, geometry, args.noise, args.seed)?;
    if let Some(path) = &args.export {
        let file = std::fs::File::create(path).map_err(io_failure)?;
        scene.export(std::io::BufWriter::new(file)).map_err(io_failure)?;
    }
    let tau = args.threshold.unwrap_or(3.0 * args.noise);
    let summary = run_demo(&scene, sizing.r, tau, args.trials, args.seed)?;
    emit_json(out, &summary)
}

/// Formats `x` with `digits` significant digits, trimming trailing zeros.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
