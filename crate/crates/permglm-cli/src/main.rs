//! Command-line front end: single test runs, synthetic dataset generation,
//! rejection-rate experiments, and envelope re-exports.
//!
//! Exit codes: 0 for a completed run, 2 when the requested test rejects at
//! its alpha (so scripts can branch without parsing JSON), 1 for any error.
//! A failed command removes whatever output files it had already written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use permglm::dataset::{load_dataset, load_design, save_dataset, save_design, FileFormat};
use permglm::rank::MeasureKind;
use permglm::results::{
    load_results, save_results, write_envelope_csv, write_rejection_csv, TestResult,
};
use permglm::synthetic::{
    report_table_csv, run_experiment_config, simulate_dataset, CorrelationForm, ErrorKind,
    ExperimentConfig, FieldSpec, GridSpec, Model, BASE_RHO,
};
use permglm::{run_test, RunOutput, RunSettings, Scheme};

#[derive(Parser)]
#[command(
    name = "permglm",
    version,
    about = "Permutation inference for general linear models over image and functional domains"
)]
struct Cli {
    /// Worker threads (default: all cores; PERMGLM_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a permutation test on a dataset and design.
    Test(TestArgs),
    /// Generate a synthetic dataset from one of the study models.
    Simulate(SimulateArgs),
    /// Estimate rejection rates over replicated synthetic datasets.
    Experiment(ExperimentArgs),
    /// Rebuild envelope exports from a recorded test run.
    EnvelopeExport(EnvelopeExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Csv,
    Binary,
}

impl From<DataFormat> for FileFormat {
    fn from(f: DataFormat) -> FileFormat {
        match f {
            DataFormat::Csv => FileFormat::Csv,
            DataFormat::Binary => FileFormat::Binary,
        }
    }
}

fn parse_methods(text: &str) -> Result<Vec<MeasureKind>> {
    text.split(',')
        .map(|tok| MeasureKind::parse(tok.trim()).map_err(Into::into))
        .collect()
}

fn parse_switch(text: &str) -> std::result::Result<bool, String> {
    match text {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got '{other}'")),
    }
}

#[derive(Args)]
struct TestArgs {
    /// Dataset file (subjects x locations plus a domain header).
    #[arg(long)]
    data: PathBuf,
    /// Design file (interest, nuisance, and contrast matrices).
    #[arg(long)]
    design: PathBuf,
    /// Dataset file layout.
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
    /// Comma-separated measures to compute.
    #[arg(long, default_value = "fmax,pmin,erl,cont,area")]
    methods: String,
    /// Number of permutations J.
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resampling scheme: raw or freedman-lane.
    #[arg(long, default_value = "raw", value_parser = Scheme::parse)]
    scheme: Scheme,
    /// Streaming evaluation (on) or the materialised field (off).
    #[arg(long, default_value = "on", value_parser = parse_switch, action = clap::ArgAction::Set)]
    streaming: bool,
    /// Output directory for results JSON and envelope CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study model: m0, m1, m1prime, or m2.
    #[arg(long, value_parser = Model::parse)]
    model: Model,
    /// Error structure, a through g.
    #[arg(long, value_parser = ErrorKind::parse)]
    error: ErrorKind,
    /// Marginal standard deviation of the error field.
    #[arg(long)]
    sigma: f64,
    /// Grid width in pixels.
    #[arg(long)]
    width: usize,
    /// Grid height; defaults to the width.
    #[arg(long)]
    height: Option<usize>,
    /// Correlation length of the base field.
    #[arg(long, default_value_t = BASE_RHO)]
    rho: f64,
    /// Correlation shape: scale for exp(-d/rho), rate for exp(-d*rho),
    /// smooth for exp(-(d/rho)^2).
    #[arg(long, value_parser = CorrelationForm::parse, default_value = "scale")]
    correlation: CorrelationForm,
    #[arg(long, default_value_t = 10)]
    subjects_per_group: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
    /// Output directory for the dataset, design, and generation record.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration name; see `--preset help`.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for the report JSON and rate table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnvelopeExportArgs {
    /// Dataset the recorded run was computed from.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    design: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
    /// Results JSON of the recorded run.
    #[arg(long)]
    results: PathBuf,
    /// Measures to export; defaults to every method in the results file.
    #[arg(long)]
    methods: Option<String>,
    /// Level for the envelopes; defaults to the recorded alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Guard value: when given, must match the recorded seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Files created by the running command; whatever is still tracked when an
/// error unwinds gets deleted, so failures never leave partial outputs.
struct OutputGuard {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        OutputGuard { paths: Vec::new(), armed: true }
    }

    fn track(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for path in &self.paths {
            if let Err(err) = fs::remove_file(path) {
                if err.kind() != std::io::ErrorKind::NotFound {
                    log::warn!("could not remove partial output {}: {err}", path.display());
                }
            }
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_envelopes(
    output: &RunOutput,
    location_ids: &[String],
    result: &mut TestResult,
    dir: &Path,
    guard: &mut OutputGuard,
) -> Result<()> {
    let Some(envelopes) = &output.envelopes else {
        return Ok(());
    };
    for envelope in envelopes {
        let envelope_name = format!("envelope_{}.csv", envelope.method);
        let rejection_name = format!("rejected_{}.csv", envelope.method);
        let envelope_path = dir.join(&envelope_name);
        let rejection_path = dir.join(&rejection_name);
        guard.track(&envelope_path);
        write_envelope_csv(envelope, location_ids, &envelope_path)?;
        guard.track(&rejection_path);
        write_rejection_csv(envelope, location_ids, &rejection_path)?;
        if let Some(report) = result.method_mut(envelope.method) {
            report.envelope_csv = Some(envelope_name);
            report.rejection_csv = Some(rejection_name);
        }
    }
    Ok(())
}

fn cmd_test(args: TestArgs) -> Result<u8> {
    let methods = parse_methods(&args.methods)?;
    let dataset = load_dataset(&args.data, args.format.into())?;
    let design = load_design(&args.design)?;
    let settings = RunSettings {
        methods,
        permutations: args.permutations,
        alpha: args.alpha,
        seed: args.seed,
        scheme: args.scheme,
        streaming: args.streaming,
        envelopes: true,
        ..RunSettings::default()
    };
    let output = run_test(&dataset, &design, &settings)?;
    if output.capped > 0 {
        log::warn!(
            "{} degenerate fits were capped at the largest representable statistic",
            output.capped
        );
    }

    ensure_out_dir(&args.out)?;
    let mut guard = OutputGuard::new();
    let mut result = TestResult::from_run(&output, &settings);
    write_envelopes(&output, dataset.location_ids(), &mut result, &args.out, &mut guard)?;
    let results_path = args.out.join("results.json");
    guard.track(&results_path);
    save_results(&result, &results_path)?;
    guard.disarm();

    for report in &result.methods {
        let marker = if report.p_value <= report.alpha { "  REJECTED" } else { "" };
        println!("{:<5} p = {:.6}{marker}", report.method.name(), report.p_value);
    }
    println!("wrote {}", results_path.display());
    Ok(if result.any_rejection() { 2 } else { 0 })
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let grid = GridSpec::new(args.width, args.height.unwrap_or(args.width))?;
    let spec = FieldSpec {
        grid,
        rho: args.rho,
        correlation: args.correlation,
        sigma: args.sigma,
        error_kind: args.error,
        model: args.model,
        subjects_per_group: args.subjects_per_group,
        seed: args.seed,
    };
    let (dataset, design) = simulate_dataset(&spec)?;

    ensure_out_dir(&args.out)?;
    let mut guard = OutputGuard::new();
    let data_name = match args.format {
        DataFormat::Csv => "dataset.csv",
        DataFormat::Binary => "dataset.bin",
    };
    let data_path = args.out.join(data_name);
    guard.track(&data_path);
    save_dataset(&dataset, &data_path, args.format.into())?;
    let design_path = args.out.join("design.csv");
    guard.track(&design_path);
    save_design(&design, &design_path)?;
    let spec_path = args.out.join("field_spec.json");
    guard.track(&spec_path);
    let spec_json = serde_json::to_string_pretty(&spec).context("cannot encode field spec")?;
    fs::write(&spec_path, spec_json + "\n")
        .with_context(|| format!("cannot write {}", spec_path.display()))?;
    guard.disarm();

    println!(
        "{} subjects x {} locations ({}x{} grid) -> {}",
        dataset.subjects(),
        dataset.locations(),
        grid.width,
        grid.height,
        data_path.display()
    );
    Ok(0)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<u8> {
    let config = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        _ => bail!("give exactly one of --config and --preset"),
    };
    let reports = run_experiment_config(&config)?;

    ensure_out_dir(&args.out)?;
    let mut guard = OutputGuard::new();
    let reports_path = args.out.join("reports.json");
    guard.track(&reports_path);
    let json = serde_json::to_string_pretty(&reports).context("cannot encode reports")?;
    fs::write(&reports_path, json + "\n")
        .with_context(|| format!("cannot write {}", reports_path.display()))?;
    let table = report_table_csv(&reports);
    let table_path = args.out.join("rates.csv");
    guard.track(&table_path);
    fs::write(&table_path, &table)
        .with_context(|| format!("cannot write {}", table_path.display()))?;
    guard.disarm();

    print!("{table}");
    println!("wrote {}", table_path.display());
    Ok(0)
}

fn cmd_envelope_export(args: EnvelopeExportArgs) -> Result<u8> {
    let recorded = load_results(&args.results)?;
    if let Some(seed) = args.seed {
        if seed != recorded.seed {
            bail!(
                "seed {seed} does not match the recorded run (seed {})",
                recorded.seed
            );
        }
    }
    let methods = match &args.methods {
        Some(text) => parse_methods(text)?,
        None => recorded.methods.iter().map(|m| m.method).collect(),
    };
    if methods.is_empty() {
        bail!("the results file lists no methods and none were requested");
    }
    let dataset = load_dataset(&args.data, args.format.into())?;
    let design = load_design(&args.design)?;
    let settings = RunSettings {
        methods,
        permutations: recorded.n_permutations,
        alpha: args.alpha.unwrap_or(recorded.alpha),
        seed: recorded.seed,
        scheme: recorded.scheme,
        streaming: true,
        envelopes: true,
        ..RunSettings::default()
    };
    let output = run_test(&dataset, &design, &settings)?;
    // The recomputed run must reproduce the recorded p-values, otherwise the
    // data or design on disk is not what the results file was made from.
    for (measure, &p) in output.measures.iter().zip(&output.p_values) {
        if let Some(report) = recorded.method(measure.kind) {
            if (report.p_value - p).abs() > 1e-12 {
                bail!(
                    "recomputed {} p-value {p} differs from recorded {}; \
                     data or design does not match the recorded run",
                    measure.kind,
                    report.p_value
                );
            }
        }
    }

    ensure_out_dir(&args.out)?;
    let mut guard = OutputGuard::new();
    let mut result = TestResult::from_run(&output, &settings);
    write_envelopes(&output, dataset.location_ids(), &mut result, &args.out, &mut guard)?;
    guard.disarm();
    for envelope in output.envelopes.as_deref().unwrap_or_default() {
        println!(
            "{:<5} {} of {} locations rejected",
            envelope.method.name(),
            envelope.rejection_count(),
            dataset.locations()
        );
    }
    Ok(0)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("PERMGLM_THREADS") {
        Ok(text) => {
            let count = text
                .parse::<usize>()
                .with_context(|| format!("PERMGLM_THREADS='{text}' is not a thread count"))?;
            Ok(Some(count))
        }
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(count) = thread_count(cli.threads)? {
        permglm::configure_threads(count)?;
    }
    match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::EnvelopeExport(args) => cmd_envelope_export(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; usage mistakes are
            // errors and must not collide with exit code 2 (= rejection).
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
