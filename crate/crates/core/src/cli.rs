//! Command-line front end.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 protocol finished
//! with failed runs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    self, compare_models, load_annotations, load_reference_results, packaged_annotations,
    packaged_reference_results, per_class_curves, per_intent_points, reference_table,
    ComparisonTable,
};
use crate::curve::{fit_curve_with, CurveModel, EfficiencyPoint, FitOptions};
use crate::dataset::load_corpus_files;
use crate::frame::parse_frame;
use crate::protocol::{
    build_manifests, build_manifests_for_sizes, ledger_to_curve, run_protocol, ExecRunner, Ledger,
    Runner, SimulatedRunnerConfig, Simulator, Truth,
};
use crate::report::{render_csv, render_svg, ReportSpec};
use crate::sampling::{make_schedule, sample, subset_size_report, Algorithm, SubsetSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dataeff", version, about = "Measure and extrapolate semantic-parser data efficiency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the logarithmic subset-size schedule as JSON.
    Schedule {
        /// Number of schedule points, including 0% and 100%.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
        n: u32,
    },
    /// Draw a target-domain training subset.
    Sample(SampleArgs),
    /// Fit h(x) = a / x^b + c to observed points.
    Fit(FitArgs),
    /// Target subset % needed for each exact-match target.
    Query(QueryArgs),
    /// Build manifests, dispatch them to a runner and write the ledger.
    Run(RunArgs),
    /// Plot discrete points and a fitted curve as SVG and/or CSV.
    Report(ReportArgs),
    /// Per-intent and per-complexity-class exact match from a ledger.
    Complexity(ComplexityArgs),
    /// Compare fitted curves of several models.
    Compare(CompareArgs),
    /// Exact match between two files of bracketed frames, one per line.
    Em(EmArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Corpus files (TSV or JSONL); split files may be given separately.
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value = "uniform")]
    pub algorithm: Algorithm,
    /// Percent of train rows (uniform) or samples per label (spis).
    #[arg(long)]
    pub size: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subset JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Points as a JSON array, a ledger JSON, or CSV with
    /// `subset_percent,exact_match` columns.
    #[arg(long)]
    pub points: PathBuf,
    /// Average exact match per subset size before fitting.
    #[arg(long)]
    pub average: bool,
    /// Model JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Curve-model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub em: Vec<f64>,
}

#[derive(Debug, Clone, ValueEnum)]
pub enum ReportFormatArg {
    Svg,
    Csv,
    Both,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Target domain.
    #[arg(long)]
    pub target: String,
    /// `simulate` or `exec:COMMAND`.
    #[arg(long, default_value = "simulate")]
    pub runner: String,
    #[arg(long, default_value = "uniform")]
    pub algorithm: Algorithm,
    /// Schedule points for uniform sampling.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub n: u32,
    /// Explicit sizes, overriding the schedule (required for spis).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub sizes: Option<Vec<f64>>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "model")]
    pub model_id: String,
    /// Ledger JSON destination.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimulationArgs,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    #[arg(long, default_value_t = -27.26, allow_negative_numbers = true)]
    pub truth_a: f64,
    #[arg(long, default_value_t = 0.35)]
    pub truth_b: f64,
    #[arg(long, default_value_t = 97.79)]
    pub truth_c: f64,
    /// Standard deviation of simulated exact-match noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Simulated exact match of the 0% run.
    #[arg(long, default_value_t = 0.0)]
    pub em_at_zero: f64,
    #[arg(long, default_value_t = 0)]
    pub sim_seed: u64,
    /// Also emit per-example predictions (needed by `complexity`).
    #[arg(long)]
    pub predictions: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub queries: Vec<f64>,
    /// Output path; with `--format both` its extension is replaced by
    /// `.svg` and `.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub format: ReportFormatArg,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Ledger whose runs carry per-example predictions.
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// `intent,class` CSV; the packaged table for the target domain when
    /// omitted.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value_t = analysis::MIN_INTENT_OCCURRENCES)]
    pub min_occurrences: usize,
    /// JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `MODEL_ID=MODEL.json`, one per model.
    #[arg(long = "model", num_args = 1..)]
    pub models: Vec<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "80,90")]
    pub em: Vec<f64>,
    /// Print the reference requirements for a domain instead of comparing
    /// fitted models.
    #[arg(long, conflicts_with = "models")]
    pub reference: Option<String>,
    /// Reference results CSV; the packaged file when omitted.
    #[arg(long, requires = "reference")]
    pub reference_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Predicted frames.
    #[arg(long)]
    pub system: PathBuf,
    /// Reference frames.
    #[arg(long)]
    pub reference: PathBuf,
}

/// A failure reported to the user with an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn data(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<i32, CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match command {
        Command::Schedule { n } => cmd_schedule(n, out),
        Command::Sample(a) => cmd_sample(a, out, err),
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Query(a) => cmd_query(a, out),
        Command::Run(a) => cmd_run(a, out, err),
        Command::Report(a) => cmd_report(a, out),
        Command::Complexity(a) => cmd_complexity(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Em(a) => cmd_em(a, out, err),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::data)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `path`, or to `out` when there is no path.
fn deliver(path: Option<&Path>, out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => emit(out, text),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn cmd_schedule(n: u32, out: &mut dyn Write) -> CmdResult {
    let schedule = make_schedule(n as usize).map_err(CliError::usage)?;
    emit(out, &to_json(&schedule))?;
    Ok(EXIT_OK)
}

fn cmd_sample(a: SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let table = load_corpus_files(&a.corpus).map_err(CliError::data)?;
    let spec = SubsetSpec {
        target_domain: a.domain,
        algorithm: a.algorithm,
        size_param: a.size,
        seed: a.seed,
    };
    let subset = sample(&table, &spec).map_err(CliError::data)?;
    let report = subset_size_report(&subset, &table).map_err(CliError::data)?;
    deliver(a.out.as_deref(), out, &to_json(&subset))?;
    let _ = writeln!(
        err,
        "sampled {} rows ({:.2}% of {} train rows)",
        report.rows,
        report.percent,
        table.domain(&spec.target_domain).map_err(CliError::data)?.train.len()
    );
    Ok(EXIT_OK)
}

/// Reads points from a JSON array of points, a ledger JSON, or a CSV with
/// `subset_percent` and `exact_match` columns (`seed`, `model_id`, `domain`
/// optional).
pub fn read_points(path: &Path) -> Result<Vec<EfficiencyPoint>, CliError> {
    let text = read_file(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return parse_points_csv(&text).map_err(|m| CliError::data(format!("{}: {m}", path.display())));
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if value.is_array() {
        serde_json::from_value(value).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    } else {
        let ledger = Ledger::from_json(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        ledger_to_curve(&ledger).map_err(CliError::data)
    }
}

fn parse_points_csv(text: &str) -> Result<Vec<EfficiencyPoint>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| columns.iter().position(|&c| c == name);
    let x_col = find("subset_percent").ok_or("missing subset_percent column")?;
    let y_col = find("exact_match").ok_or("missing exact_match column")?;
    let (seed_col, model_col, domain_col) = (find("seed"), find("model_id"), find("domain"));

    let mut points = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(format!("line {}: expected {} columns", i + 1, columns.len()));
        }
        let num = |col: usize| -> Result<f64, String> {
            cells[col]
                .parse()
                .map_err(|e| format!("line {}: {:?}: {e}", i + 1, cells[col]))
        };
        let mut p = EfficiencyPoint::new(num(x_col)?, num(y_col)?);
        if let Some(c) = seed_col {
            p.seed = cells[c]
                .parse()
                .map_err(|e| format!("line {}: seed: {e}", i + 1))?;
        }
        if let Some(c) = model_col {
            p.model_id = cells[c].to_owned();
        }
        if let Some(c) = domain_col {
            p.domain = cells[c].to_owned();
        }
        points.push(p);
    }
    Ok(points)
}

fn read_model(path: &Path) -> Result<CurveModel, CliError> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::data(format!("{}: not a curve model: {e}", path.display())))
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let points = read_points(&a.points)?;
    let at_zero = points.iter().filter(|p| p.subset_percent == 0.0).count();
    if at_zero > 0 {
        let _ = writeln!(
            err,
            "warning: {at_zero} point(s) at 0% excluded from the fit (h is undefined at x = 0)"
        );
    }
    let options = FitOptions {
        average_by_subset: a.average,
    };
    let model = fit_curve_with(&points, &options).map_err(CliError::data)?;
    if !model.converged {
        let _ = writeln!(err, "warning: fit stopped after {} iterations without converging", model.iterations);
    }
    if !model.is_well_formed() {
        let _ = writeln!(err, "warning: fitted curve is not increasing toward an asymptote");
    }
    deliver(a.out.as_deref(), out, &to_json(&model))?;
    Ok(EXIT_OK)
}

/// One line per target: `em<TAB>requirement`.
pub fn format_query(model: &CurveModel, y: f64) -> String {
    let requirement = match model.invert(y) {
        Ok(inv) => {
            let mut s = format!("{:.3}", inv.subset_percent);
            if inv.exceeds_full_data {
                s.push_str(" (exceeds full data)");
            } else if let Some((lo, hi)) = model.fit_domain {
                if inv.subset_percent < lo || inv.subset_percent > hi {
                    s.push_str(" (extrapolated)");
                }
            }
            s
        }
        Err(_) => format!("unreachable (asymptote {:.2})", model.c),
    };
    format!("{y}\t{requirement}")
}

fn cmd_query(a: QueryArgs, out: &mut dyn Write) -> CmdResult {
    let model = read_model(&a.model)?;
    if let Some(&y) = a.em.iter().find(|&&y| !(0.0..=100.0).contains(&y)) {
        return Err(CliError::data(format!("exact-match target {y} outside [0, 100]")));
    }
    let mut text = String::from("exact_match\tsubset_percent\n");
    for &y in &a.em {
        text.push_str(&format_query(&model, y));
        text.push('\n');
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

enum RunnerChoice {
    Simulate,
    Exec(ExecRunner),
}

fn parse_runner(spec: &str) -> Result<RunnerChoice, CliError> {
    if spec == "simulate" {
        return Ok(RunnerChoice::Simulate);
    }
    spec.strip_prefix("exec:")
        .and_then(ExecRunner::from_command_line)
        .map(RunnerChoice::Exec)
        .ok_or_else(|| CliError::usage(format!("runner must be `simulate` or `exec:COMMAND`, got {spec:?}")))
}

fn cmd_run(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let choice = parse_runner(&a.runner)?;
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let table = load_corpus_files(&a.corpus).map_err(CliError::data)?;
    let manifests = match (&a.sizes, a.algorithm) {
        (Some(sizes), algorithm) => {
            build_manifests_for_sizes(&table, &a.target, sizes, algorithm, &a.seeds, &a.model_id)
        }
        (None, Algorithm::Uniform) => {
            let schedule = make_schedule(a.n as usize).map_err(CliError::usage)?;
            build_manifests(&table, &a.target, &schedule, Algorithm::Uniform, &a.seeds, &a.model_id)
        }
        (None, Algorithm::Spis) => return Err(CliError::usage("spis runs need explicit --sizes")),
    }
    .map_err(CliError::data)?;

    let config = SimulatedRunnerConfig {
        truth: Truth {
            a: a.sim.truth_a,
            b: a.sim.truth_b,
            c: a.sim.truth_c,
        },
        noise_sigma: a.sim.noise,
        em_at_zero: a.sim.em_at_zero,
        seed: a.sim.sim_seed,
    };
    let simulator;
    let runner: &dyn Runner = match &choice {
        RunnerChoice::Simulate => {
            simulator = if a.sim.predictions {
                Simulator::with_predictions(config, &table)
            } else {
                Simulator::new(config)
            }
            .map_err(CliError::usage)?;
            &simulator
        }
        RunnerChoice::Exec(exec) => exec,
    };

    let ledger = run_protocol(&manifests, runner, a.jobs).map_err(CliError::data)?;
    write_file(&a.out, &ledger.to_json())?;
    let failed = ledger.failure_count();
    let _ = writeln!(
        out,
        "{} runs, {} ok, {} failed -> {}",
        ledger.len(),
        ledger.len() - failed,
        failed,
        a.out.display()
    );
    for (m, error) in ledger.failures() {
        let _ = writeln!(err, "failed {}: {error}", m.run_id);
    }
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> CmdResult {
    let points = read_points(&a.points)?;
    let model = a.model.as_deref().map(read_model).transpose()?;
    let spec = ReportSpec {
        points,
        model,
        queries: a.queries,
    };
    let targets: Vec<(PathBuf, String)> = match a.format {
        ReportFormatArg::Svg => vec![(a.out.clone(), render_svg(&spec).map_err(CliError::data)?)],
        ReportFormatArg::Csv => vec![(a.out.clone(), render_csv(&spec).map_err(CliError::data)?)],
        ReportFormatArg::Both => vec![
            (a.out.with_extension("svg"), render_svg(&spec).map_err(CliError::data)?),
            (a.out.with_extension("csv"), render_csv(&spec).map_err(CliError::data)?),
        ],
    };
    for (path, text) in &targets {
        write_file(path, text)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ComplexityOutput {
    domain: String,
    per_intent: std::collections::BTreeMap<String, Vec<EfficiencyPoint>>,
    per_class: std::collections::BTreeMap<analysis::ComplexityClass, Vec<analysis::ClassPoint>>,
}

fn cmd_complexity(a: ComplexityArgs, out: &mut dyn Write) -> CmdResult {
    let ledger = Ledger::from_json(&read_file(&a.ledger)?).map_err(CliError::data)?;
    let table = load_corpus_files(&a.corpus).map_err(CliError::data)?;
    let domain = ledger
        .entries()
        .first()
        .map(|e| e.manifest.target_domain.clone())
        .ok_or_else(|| CliError::data("ledger is empty"))?;
    let annotations = match &a.annotations {
        Some(path) => load_annotations(path).map_err(CliError::data)?,
        None => packaged_annotations(&domain)
            .ok_or_else(|| CliError::data(format!("no packaged annotations for {domain:?}; pass --annotations")))?,
    };
    let per_intent = per_intent_points(&ledger, &table, a.min_occurrences).map_err(CliError::data)?;
    let per_class = per_class_curves(&per_intent, &annotations).map_err(CliError::data)?;
    let output = ComplexityOutput {
        domain,
        per_intent,
        per_class,
    };
    deliver(a.out.as_deref(), out, &to_json(&output))?;
    Ok(EXIT_OK)
}

fn render_table(table: &ComparisonTable, format: &TableFormat) -> String {
    match format {
        TableFormat::Text => table.to_text(),
        TableFormat::Csv => table.to_csv(),
    }
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> CmdResult {
    if let Some(domain) = &a.reference {
        let results = match &a.reference_file {
            Some(path) => load_reference_results(path).map_err(CliError::data)?,
            None => packaged_reference_results(),
        };
        let table = reference_table(&results, domain);
        if table.rows.is_empty() {
            return Err(CliError::data(format!("no reference results for {domain:?}")));
        }
        emit(out, &render_table(&table, &a.format))?;
        return Ok(EXIT_OK);
    }
    let mut curves = Vec::with_capacity(a.models.len());
    for entry in &a.models {
        let (id, path) = entry
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--model expects ID=PATH, got {entry:?}")))?;
        curves.push((id.to_owned(), read_model(Path::new(path))?));
    }
    let table = compare_models(&curves, &a.em).map_err(CliError::data)?;
    emit(out, &render_table(&table, &a.format))?;
    Ok(EXIT_OK)
}

fn read_frame_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_file(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

fn cmd_em(a: EmArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let system = read_frame_lines(&a.system)?;
    let reference = read_frame_lines(&a.reference)?;
    if reference.is_empty() {
        return Err(CliError::data("reference file has no frames"));
    }
    if system.len() != reference.len() {
        return Err(CliError::data(format!(
            "{} system frames but {} reference frames",
            system.len(),
            reference.len()
        )));
    }
    let mut hits = 0usize;
    let mut unparseable = 0usize;
    for (i, (s, r)) in system.iter().zip(&reference).enumerate() {
        let r = parse_frame(r).map_err(|e| CliError::data(format!("reference frame {}: {e}", i + 1)))?;
        match parse_frame(s) {
            Ok(s) => hits += usize::from(s == r),
            Err(_) => unparseable += 1,
        }
    }
    if unparseable > 0 {
        let _ = writeln!(err, "warning: {unparseable} system frame(s) failed to parse and count as wrong");
    }
    let _ = writeln!(out, "{}", 100.0 * hits as f64 / reference.len() as f64);
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(
            std::iter::once("dataeff").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn schedule_command() {
        let (code, out, _) = run(&["schedule", "--n", "10"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["sizes"], serde_json::json!([0, 1, 2, 4, 7, 12, 21, 36, 60, 100]));
        let (_, out, _) = run(&["schedule", "--n", "2"]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["sizes"], serde_json::json!([0, 100]));
        assert_eq!(run(&["schedule", "--n", "1"]).0, EXIT_USAGE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(&[]).0, EXIT_USAGE);
        assert_eq!(run(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn query_formatting() {
        let model = CurveModel::from_params(-27.26, 0.35, 97.79);
        assert_eq!(format_query(&model, 80.0), "80\t3.385");
        assert_eq!(format_query(&model, 90.0), "90\t35.830");
        assert_eq!(format_query(&model, 98.0), "98\tunreachable (asymptote 97.79)");
        assert_eq!(format_query(&model, 97.7), "97.7\t12285164.534 (exceeds full data)");
        let fitted = CurveModel {
            fit_domain: Some((1.0, 21.0)),
            ..model
        };
        assert!(format_query(&fitted, 90.0).ends_with("(extrapolated)"));
    }

    #[test]
    fn points_csv() {
        let pts = parse_points_csv("subset_percent,exact_match,seed\n1,70.5,0\n\n2,75,1\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[1].subset_percent, pts[1].exact_match, pts[1].seed), (2.0, 75.0, 1));
        assert!(parse_points_csv("x,y\n1,2\n").is_err());
        assert!(parse_points_csv("subset_percent,exact_match\n1\n").is_err());
        assert!(parse_points_csv("subset_percent,exact_match\n1,abc\n").is_err());
    }

    #[test]
    fn runner_spec() {
        assert!(matches!(parse_runner("simulate"), Ok(RunnerChoice::Simulate)));
        assert!(matches!(parse_runner("exec:python train.py"), Ok(RunnerChoice::Exec(_))));
        assert!(parse_runner("exec:").is_err());
        assert!(parse_runner("gpu").is_err());
    }
}
