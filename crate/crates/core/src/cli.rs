//! Command-line front end.
//!
//! Exit codes: 0 success, 1 filesystem failure, 2 bad data, 3 bad usage.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    calibrate, export_calibration_curve, Alpha, CalibrationResult, Threshold,
};
use crate::io::{
    file_sha256, infer_universe, load_probabilities, read_classes, split, write_atomic,
    write_dataset, write_report, DataFormat, IoError, ReportFormat, SplitSpec,
};
use crate::metrics::{evaluate, EvaluationReport};
use crate::predictor::{predict_with_threshold, PredictionSet};
use crate::synth::{coverage_trial, generate, trial_specs, SyntheticSpec, TrialSummary};
use crate::types::{ClassUniverse, Dataset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 3,
            CliError::Io(e) if e.is_data_error() => 2,
            CliError::Io(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "conformal-gate",
    version,
    about = "Split conformal prediction sets for classifier probability outputs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the conformal threshold from a labeled calibration file.
    Calibrate(CalibrateArgs),
    /// Emit one prediction set per input row as JSON lines.
    Predict(PredictArgs),
    /// Score prediction sets and point predictions against true labels.
    Evaluate(EvaluateArgs),
    /// Measure empirical coverage on synthetic classifier outputs.
    Simulate(SimulateArgs),
    /// Partition a dataset file into named parts with a seeded shuffle.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Class list (`[{"index": 0, "name": "..."}, ...]`).
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration curve output; `.json` for JSON, CSV otherwise.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("sets").required(true).args(["calibration", "predictions"])))]
pub struct EvaluateArgs {
    /// Calibration artifact; prediction sets are computed from it.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Precomputed prediction-set JSONL, aligned with --input.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_json: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 9)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_calib: usize,
    #[arg(long, default_value_t = 10000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 50.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every trial's calibration and test data as CSV here.
    #[arg(long)]
    pub write_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated `name=fraction` list.
    #[arg(long, default_value = "calib=0.5,test=0.5")]
    pub parts: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub stratified: bool,
    /// Each part is written here as `<name>.<ext>`, in the input's format.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

/// What `calibrate` writes and `predict` / `evaluate` read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub alpha: Alpha,
    pub n: usize,
    pub qlevel: f64,
    pub rank: usize,
    pub threshold: Threshold,
    pub classes: ClassUniverse,
    pub universe_sha256: String,
    pub input_sha256: String,
}

impl CalibrationArtifact {
    pub fn new(result: &CalibrationResult, universe: &ClassUniverse, input_sha256: String) -> Self {
        Self {
            alpha: result.alpha,
            n: result.n,
            qlevel: result.qlevel,
            rank: result.rank,
            threshold: result.threshold,
            classes: universe.clone(),
            universe_sha256: universe.fingerprint(),
            input_sha256,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Data(format!("{}: bad calibration artifact: {e}", path.display()))
        })
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn format_of(path: &Path, explicit: Option<DataFormat>) -> DataFormat {
    explicit.unwrap_or_else(|| DataFormat::from_path(path))
}

fn universe_for(
    path: &Path,
    data: &DataArgs,
    fallback: Option<&ClassUniverse>,
) -> Result<ClassUniverse, CliError> {
    if let Some(classes) = &data.classes {
        return Ok(read_classes(classes)?);
    }
    if let Some(u) = fallback {
        return Ok(u.clone());
    }
    Ok(infer_universe(path, format_of(path, data.format))?)
}

fn load(path: &Path, data: &DataArgs, universe: &ClassUniverse) -> Result<Dataset, CliError> {
    let (dataset, report) = load_probabilities(path, format_of(path, data.format), universe)?;
    if !report.warnings.is_empty() {
        log::warn!(
            "{}: {} probability vector(s) renormalized with a warning",
            path.display(),
            report.warnings.len()
        );
    }
    Ok(dataset)
}

fn parse_alpha(value: f64) -> Result<Alpha, CliError> {
    Alpha::new(value).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<CalibrationArtifact, CliError> {
    let alpha = parse_alpha(args.alpha)?;
    let universe = universe_for(&args.input, &args.data, None)?;
    let dataset = load(&args.input, &args.data, &universe)?;
    let result = calibrate(&dataset, alpha).map_err(CliError::data)?;
    let artifact = CalibrationArtifact::new(&result, &universe, file_sha256(&args.input)?);
    write_atomic(&args.out, &to_json_bytes(&artifact))?;
    if let Some(curve_path) = &args.curve {
        let curve = export_calibration_curve(&result);
        let bytes = match curve_path.extension().and_then(|e| e.to_str()) {
            Some("json") => to_json_bytes(&curve),
            _ => curve.to_csv().into_bytes(),
        };
        write_atomic(curve_path, &bytes)?;
    }
    log::info!(
        "calibrated on {} samples: qlevel {}, threshold {}",
        result.n,
        result.qlevel,
        result.threshold
    );
    Ok(artifact)
}

fn warn_on_universe_drift(artifact: &CalibrationArtifact, universe: &ClassUniverse) {
    if artifact.universe_sha256 != universe.fingerprint() {
        log::warn!("class list differs from the one used for calibration");
    }
}

pub fn cmd_predict(args: &PredictArgs) -> Result<Vec<PredictionSet>, CliError> {
    let artifact = CalibrationArtifact::read(&args.calibration)?;
    let universe = universe_for(&args.input, &args.data, Some(&artifact.classes))?;
    warn_on_universe_drift(&artifact, &universe);
    let dataset = load(&args.input, &args.data, &universe)?;
    let sets = predict_with_threshold(&dataset, artifact.threshold).map_err(CliError::data)?;
    write_atomic(&args.out, prediction_jsonl(&sets).as_bytes())?;
    Ok(sets)
}

pub fn prediction_jsonl(sets: &[PredictionSet]) -> String {
    let mut out = String::new();
    for set in sets {
        out.push_str(&serde_json::to_string(set).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn read_prediction_jsonl(path: &Path) -> Result<Vec<PredictionSet>, CliError> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut sets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: PredictionSet = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        if set.set_size != set.members.len() {
            return Err(CliError::Data(format!(
                "line {}: set_size {} but {} members",
                i + 1,
                set.set_size,
                set.members.len()
            )));
        }
        sets.push(set);
    }
    Ok(sets)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport, CliError> {
    let artifact = args
        .calibration
        .as_deref()
        .map(CalibrationArtifact::read)
        .transpose()?;
    let universe = universe_for(
        &args.input,
        &args.data,
        artifact.as_ref().map(|a| &a.classes),
    )?;
    let dataset = load(&args.input, &args.data, &universe)?;
    let sets = match (&artifact, &args.predictions) {
        (Some(a), _) => {
            warn_on_universe_drift(a, &universe);
            predict_with_threshold(&dataset, a.threshold).map_err(CliError::data)?
        }
        (None, Some(p)) => read_prediction_jsonl(p)?,
        (None, None) => {
            return Err(CliError::Usage(
                "need --calibration or --predictions".into(),
            ))
        }
    };
    let report = evaluate(&dataset, &sets).map_err(CliError::data)?;
    write_report(&report, &args.out_json, ReportFormat::Json)?;
    write_report(&report, &args.out_csv, ReportFormat::Csv)?;
    Ok(report)
}

/// Human-readable summary printed by `evaluate`.
pub fn summary_table(r: &EvaluationReport) -> String {
    let width = r
        .class_names
        .iter()
        .map(|n| n.chars().count())
        .max()
        .unwrap_or(0)
        .max("Overall".len());
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>7}\n",
        "class", "recall", "coverage", "set size", "marginal", "support"
    );
    for (i, name) in r.class_names.iter().enumerate() {
        out.push_str(&format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>7}\n",
            name,
            fmt(r.per_class_recall[i]),
            fmt(r.per_class_strict_coverage[i]),
            fmt(r.per_class_avg_set_size[i]),
            fmt(r.per_class_marginal_coverage[i]),
            r.class_counts[i]
        ));
    }
    out.push_str(&format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>7}\n",
        "Overall",
        fmt(Some(r.accuracy)),
        fmt(Some(r.overall_strict_coverage)),
        fmt(Some(r.overall_avg_set_size)),
        fmt(Some(r.marginal_coverage)),
        r.n_test
    ));
    let sizes: Vec<String> = r
        .uncertain_counts
        .counts
        .iter()
        .map(|(size, count)| format!("{size}:{count}"))
        .collect();
    out.push_str(&format!(
        "set sizes {{{}}}, uncertain {}\n",
        sizes.join(", "),
        r.uncertain_counts.uncertain_total
    ));
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<TrialSummary, CliError> {
    let alpha = parse_alpha(args.alpha)?;
    let spec = SyntheticSpec::uniform(args.k, args.sharpness, args.noise, args.seed);
    spec.validate().map_err(CliError::data)?;
    let summary = coverage_trial(&spec, args.n_calib, args.n_test, alpha, args.seeds)
        .map_err(CliError::data)?;
    if let Some(dir) = &args.write_data {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        for i in 0..args.seeds {
            let (calib_spec, test_spec) = trial_specs(&spec, i);
            let calib = generate(&calib_spec, args.n_calib).map_err(CliError::data)?;
            let test = generate(&test_spec, args.n_test).map_err(CliError::data)?;
            write_dataset(
                &calib,
                &dir.join(format!("seed_{i:03}_calib.csv")),
                DataFormat::Csv,
            )?;
            write_dataset(
                &test,
                &dir.join(format!("seed_{i:03}_test.csv")),
                DataFormat::Csv,
            )?;
        }
    }
    write_atomic(&args.out, &to_json_bytes(&summary))?;
    Ok(summary)
}

pub fn cmd_split(args: &SplitArgs) -> Result<Vec<(String, usize)>, CliError> {
    let parts = SplitSpec::parse_parts(&args.parts).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = SplitSpec::new(parts, args.seed, args.stratified)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let universe = universe_for(&args.input, &args.data, None)?;
    let dataset = load(&args.input, &args.data, &universe)?;
    let format = format_of(&args.input, args.data.format);
    let ext = match format {
        DataFormat::Csv => "csv",
        DataFormat::Jsonl => "jsonl",
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| IoError::io(&args.out_dir, e))?;
    let outcome = split(&dataset, &spec)?;
    let mut sizes = Vec::new();
    for (name, part) in &outcome.parts {
        write_dataset(part, &args.out_dir.join(format!("{name}.{ext}")), format)?;
        sizes.push((name.clone(), part.len()));
    }
    Ok(sizes)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Calibrate(args) => {
            let a = cmd_calibrate(args)?;
            println!("n={} qlevel={} threshold={}", a.n, a.qlevel, a.threshold);
        }
        Command::Predict(args) => {
            let sets = cmd_predict(args)?;
            println!("wrote {} prediction sets", sets.len());
        }
        Command::Evaluate(args) => {
            let report = cmd_evaluate(args)?;
            print!("{}", summary_table(&report));
        }
        Command::Simulate(args) => {
            let s = cmd_simulate(args)?;
            println!(
                "coverage mean={:.4} sd={:.4} min={:.4} max={:.4} over {} seeds",
                s.mean, s.sd, s.min, s.max, s.n_seeds
            );
        }
        Command::Split(args) => {
            for (name, size) in cmd_split(args)? {
                println!("{name}: {size}");
            }
        }
    }
    Ok(())
}
