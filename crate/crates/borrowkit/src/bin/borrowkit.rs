//! Command-line front end: simulation harness, CSV analysis pipeline,
//! compatibility diagnostics, scenario listing, and the synthetic
//! demonstration fixture.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or validation
//! errors (bad flags, malformed configs, schema violations).

use std::fs;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use borrowkit::analyze::{run_analysis, run_mpi, AnalysisConfig};
use borrowkit::dataset::Dataset;
use borrowkit::error::Result;
use borrowkit::fixture::{generate_fixture, FixtureConfig, Populations};
use borrowkit::mpi::{MpiConfig, MpiDof, MpiFunctional, MpiWeighting};
use borrowkit::report::{write_study, ReportFormat};
use borrowkit::scenarios::{scenario_csv, ScenarioId};
use borrowkit::study::{run_study, Strategy, StudyConfig};

#[derive(Parser)]
#[command(
    name = "borrowkit",
    version,
    about = "Augment a trial's control arm with propensity-weighted external controls",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo operating-characteristics study
    Simulate(SimulateArgs),
    /// Analyze a CSV dataset and print a JSON report
    Analyze(AnalyzeArgs),
    /// Print compatibility diagnostics (no posterior sampling)
    Mpi(MpiArgs),
    /// Print the simulation scenario table as CSV
    Scenarios,
    /// Generate the synthetic demonstration dataset
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario selection: a numeral (I..XII), a comma list, or "all"
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Current-study size (split evenly between the arms)
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// External cohort size
    #[arg(long = "n-ext", default_value_t = 1000)]
    n_ext: usize,
    /// Replications per scenario/strategy cell
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Posterior draws retained per arm
    #[arg(long, default_value_t = 5000)]
    draws: usize,
    /// Posterior draws discarded up front
    #[arg(long = "burn-in", default_value_t = 2000)]
    burn_in: usize,
    /// Borrowing strategy, repeatable: "psw-bpp" or "fixed:a1,a2"
    #[arg(long = "strategy")]
    strategy: Vec<Strategy>,
    /// RNG seed (required: no wall-clock default)
    #[arg(long)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv, md, or json
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Propensity-weight the external arm under fixed strategies too
    #[arg(long = "fb-weighted")]
    fb_weighted: bool,
    /// Worker thread cap (overrides BORROWKIT_THREADS)
    #[arg(long)]
    threads: Option<usize>,
    /// External summaries feeding the indices: weighted or raw
    #[arg(long = "mpi-weighting", default_value = "weighted")]
    mpi_weighting: MpiWeighting,
    /// F-numerator degrees of freedom: raw or ess
    #[arg(long = "mpi-dof", default_value = "raw")]
    mpi_dof: MpiDof,
    /// Index-to-strength map: tail or level-set
    #[arg(long = "mpi-functional", default_value = "tail")]
    mpi_functional: MpiFunctional,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Subject-level CSV dataset
    #[arg(long)]
    data: PathBuf,
    /// JSON analysis configuration
    #[arg(long)]
    config: PathBuf,
    /// Report path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MpiArgs {
    /// Subject-level CSV dataset
    #[arg(long)]
    data: PathBuf,
    /// JSON analysis configuration
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    /// Dataset path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (required: no wall-clock default)
    #[arg(long)]
    seed: u64,
    /// Current-study size
    #[arg(long = "n-current", default_value_t = 531)]
    n_current: usize,
    /// External cohort size
    #[arg(long = "n-external", default_value_t = 710)]
    n_external: usize,
    /// True exposure effect injected into the outcomes
    #[arg(long, default_value_t = 0.4)]
    theta: f64,
    /// Covariate populations: matched or shifted
    #[arg(long, default_value = "matched")]
    populations: Populations,
    /// Also write a ready-to-use analysis configuration here
    #[arg(long = "config-out")]
    config_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Mpi(args) => cmd_mpi(&args),
        Command::Scenarios => cmd_scenarios(),
        Command::Fixture(args) => cmd_fixture(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes `text` to the path, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenarios = ScenarioId::parse_list(&args.scenario)?;
    let strategies = if args.strategy.is_empty() {
        vec![Strategy::PswBpp]
    } else {
        args.strategy
    };
    let cfg = StudyConfig {
        scenarios,
        n: args.n,
        n_external: args.n_ext,
        reps: args.reps,
        draws: args.draws,
        burn_in: args.burn_in,
        seed: args.seed,
        strategies,
        fb_weighted: args.fb_weighted,
        mpi: MpiConfig {
            weighting: args.mpi_weighting,
            dof: args.mpi_dof,
            functional: args.mpi_functional,
        },
        threads: args.threads,
    };
    let result = run_study(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut file = File::create(path)?;
            write_study(&mut file, &cfg, &result, args.format)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_study(&mut lock, &cfg, &result, args.format)
        }
    }
}

fn load_dataset(data: &Path, cfg: &AnalysisConfig) -> Result<Dataset> {
    let file = File::open(data)?;
    Dataset::read_csv(
        file,
        &cfg.outcome_column,
        &cfg.treatment_column,
        &cfg.source_column,
        &cfg.covariate_columns,
    )
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = AnalysisConfig::from_json(&fs::read_to_string(&args.config)?)?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let report = run_analysis(&dataset, &cfg)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(args.out.as_deref(), &json)
}

fn cmd_mpi(args: &MpiArgs) -> Result<()> {
    let cfg = AnalysisConfig::from_json(&fs::read_to_string(&args.config)?)?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let summary = run_mpi(&dataset, &cfg)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    emit(None, &json)
}

fn cmd_scenarios() -> Result<()> {
    emit(None, &scenario_csv())
}

fn cmd_fixture(args: &FixtureArgs) -> Result<()> {
    let cfg = FixtureConfig {
        n_current: args.n_current,
        n_external: args.n_external,
        theta: args.theta,
        seed: args.seed,
        populations: args.populations,
        ..FixtureConfig::new(args.seed)
    };
    let dataset = generate_fixture(&cfg)?;
    let mut buf = Vec::new();
    dataset.write_csv(&mut buf, "outcome", "treatment", "source")?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    emit(args.out.as_deref(), &text)?;
    if let Some(path) = &args.config_out {
        let mut json = serde_json::to_string_pretty(&cfg.analysis_config())?;
        json.push('\n');
        fs::write(path, json)?;
    }
    Ok(())
}
