//! Command-line front-end for `occexpo`.
//!
//! Every command reads its inputs fully, computes, and only then writes its
//! outputs. Each output file is written atomically and accompanied by a
//! `<file>.manifest.json` recording inputs, parameters and SHA-256 digests.

mod commands;
mod output;
mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use output::{write_atomic, Manifest};
pub use validate::{validate, Diagnostic};

/// Environment variable naming an external classifier program. When set,
/// `annotate` sends prompts to it instead of a mock client.
pub const CLIENT_CMD_ENV: &str = "OCCEXPO_CLIENT_CMD";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Computation,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Input => 3,
            ErrorKind::Computation => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Input,
            message: message.into(),
        }
    }

    pub fn computation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Computation,
            message: message.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "occexpo",
    version,
    about = "Occupational exposure scoring, aggregation and adoption simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write numbers at full precision instead of 4-decimal fixed point.
    #[arg(long, global = true)]
    pub full_precision: bool,

    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label every scoreable occupation with exposure categories and append
    /// the runs to a JSON-lines annotation store.
    Annotate(AnnotateArgs),
    /// Build a score table from an annotation store, or re-derive the
    /// ensemble column of an existing score table.
    Score(ScoreArgs),
    /// Average occupation scores up the taxonomy hierarchy.
    Aggregate(AggregateArgs),
    /// Project occupation scores onto industries through an intensity matrix.
    Industry(IndustryArgs),
    /// Project industry exposure onto demographic groups.
    Demographic(DemographicArgs),
    /// Summary statistics, correlation panel and outcome scatter report.
    Stats(StatsArgs),
    /// Evaluate adoption decisions and aggregate growth for a scenario.
    Simulate(SimulateArgs),
    /// Aggregate growth over a damage-ratio by adoption-ratio grid.
    Contour(ContourArgs),
    /// Check input files without computing anything.
    Validate(ValidateArgs),
    /// Run score, aggregate, industry, demographic and stats in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoreInput {
    /// Score table CSV (`code,title,expert,<models...>,ensemble`).
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,

    /// Score column to use: `ensemble`, `expert` or a model name.
    #[arg(long, default_value = "ensemble")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Taxonomy CSV (`code,title,description,excluded`).
    #[arg(long, value_name = "FILE")]
    pub taxonomy: PathBuf,

    /// Annotation store to append to (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Comma-separated model identifiers to annotate with.
    #[arg(long, default_value = "mock", value_delimiter = ',')]
    pub models: Vec<String>,

    /// Mock client: `fixed:<E0..E3>`, `cycle:<a,b,...>`, `script:<file>` or
    /// `seeded`. Prefix with `<model>=` to target one model; repeatable.
    #[arg(long, default_value = "seeded")]
    pub mock: Vec<String>,

    /// Labels requested per occupation and model.
    #[arg(long, default_value_t = occexpo::annotate::DEFAULT_SAMPLES)]
    pub n_samples: usize,

    /// Extra attempts per sample after a transport or parse failure.
    #[arg(long, default_value_t = occexpo::annotate::DEFAULT_MAX_RETRIES)]
    pub max_retries: usize,

    /// Maximum concurrent requests for clients that allow it.
    #[arg(long, default_value_t = 4)]
    pub in_flight: usize,

    /// Seed for the seeded mock client.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Rubric TOML (`preamble`, `E0`..`E3`); a built-in rubric otherwise.
    #[arg(long, value_name = "FILE")]
    pub rubric: Option<PathBuf>,

    /// Language tag placed in the prompt.
    #[arg(long, default_value = "zh-CN")]
    pub language: String,

    /// Decoding temperature passed through to the client.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scores", "annotations"]))]
pub struct ScoreArgs {
    /// Existing score table whose ensemble column is recomputed.
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,

    /// Annotation store (JSON lines) to score.
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,

    /// Taxonomy CSV supplying occupation titles.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,

    /// Expert ratings (`code,score[,expert]`, one row per rating).
    #[arg(long, value_name = "FILE")]
    pub experts: Option<PathBuf>,

    /// Output CSV; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Taxonomy CSV.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: PathBuf,

    #[command(flatten)]
    pub scores: ScoreInput,

    /// Output CSV; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndustryArgs {
    /// Occupational intensity matrix (`industry_id,<codes...>`).
    #[arg(long, value_name = "FILE")]
    pub intensity: PathBuf,

    #[command(flatten)]
    pub scores: ScoreInput,

    /// Output CSV; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemographicArgs {
    /// Demographic shares (`age_group,<industry ids...>`).
    #[arg(long, value_name = "FILE")]
    pub demographics: PathBuf,

    /// Occupational intensity matrix.
    #[arg(long, value_name = "FILE")]
    pub intensity: PathBuf,

    #[command(flatten)]
    pub scores: ScoreInput,

    /// Output CSV; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub scores: ScoreInput,

    /// Report one correlation between two columns.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub pair: Option<Vec<String>>,

    /// Outcome series (`code,<salary|wage_growth|vacancy_share|vacancy_count|...>`).
    #[arg(long, value_name = "FILE")]
    pub outcomes: Option<PathBuf>,

    /// Earlier vacancy series; with `--outcomes` the scatter uses share growth.
    #[arg(long, value_name = "FILE", requires = "outcomes")]
    pub baseline_outcomes: Option<PathBuf>,

    /// Write scatter plot data (`x,y,label`) here.
    #[arg(long, value_name = "FILE", requires = "outcomes")]
    pub plot_data: Option<PathBuf>,

    /// p-value cut-offs for one, two, three stars.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.01,0.001")]
    pub thresholds: Vec<f64>,

    /// Output JSON report; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioInput {
    /// Scenario TOML (growth law and `[[sector]]` tables).
    #[arg(long, value_name = "FILE")]
    pub scenario: PathBuf,

    /// Override the exponential growth scale.
    #[arg(long)]
    pub rho: Option<f64>,

    /// Intensity matrix used for sectors without an explicit exposure.
    #[arg(long, value_name = "FILE", requires = "scores")]
    pub intensity: Option<PathBuf>,

    /// Score table used with `--intensity`.
    #[arg(long, value_name = "FILE", requires = "intensity")]
    pub scores: Option<PathBuf>,

    /// Score column used with `--intensity`.
    #[arg(long, default_value = "ensemble")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioInput,

    /// `optimal`, `none`, `all`, or one 0/1 per sector (comma-separated).
    #[arg(long, default_value = "optimal")]
    pub decisions: String,

    /// Output JSON report; stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub scenario: ScenarioInput,

    /// Points on both grid axes.
    #[arg(long, default_value_t = occexpo::model::DEFAULT_GRID_POINTS)]
    pub points: usize,

    /// Points on the damage-ratio axis (overrides `--points`).
    #[arg(long)]
    pub delta_points: Option<usize>,

    /// Points on the adoption-ratio axis (overrides `--points`).
    #[arg(long)]
    pub ratio_points: Option<usize>,

    /// Largest damage ratio on the grid.
    #[arg(long, default_value_t = occexpo::model::DEFAULT_DELTA_MAX)]
    pub delta_max: f64,

    /// Output CSV (rows: damage ratio, columns: adoption ratio); stdout if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct ValidateArgs {
    /// Taxonomy CSV.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,

    /// Score table CSV.
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,

    /// Expert ratings CSV.
    #[arg(long, value_name = "FILE")]
    pub experts: Option<PathBuf>,

    /// Annotation store (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,

    /// Occupational intensity matrix.
    #[arg(long, value_name = "FILE")]
    pub intensity: Option<PathBuf>,

    /// Demographic shares.
    #[arg(long, value_name = "FILE")]
    pub demographics: Option<PathBuf>,

    /// Outcome series.
    #[arg(long, value_name = "FILE")]
    pub outcomes: Option<PathBuf>,

    /// Scenario TOML.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Score table CSV.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,

    /// Taxonomy CSV.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: PathBuf,

    /// Intensity matrix; enables the industry stage.
    #[arg(long, value_name = "FILE")]
    pub intensity: Option<PathBuf>,

    /// Demographic shares; enables the demographic stage (needs `--intensity`).
    #[arg(long, value_name = "FILE", requires = "intensity")]
    pub demographics: Option<PathBuf>,

    /// Outcome series for the scatter report.
    #[arg(long, value_name = "FILE")]
    pub outcomes: Option<PathBuf>,

    /// Score column driving aggregation and projection.
    #[arg(long, default_value = "ensemble")]
    pub column: String,

    /// p-value cut-offs for one, two, three stars.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.01,0.001")]
    pub thresholds: Vec<f64>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Runs one command. Text destined for stdout is returned, not printed.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let decimals = if cli.full_precision { None } else { Some(4) };
    commands::dispatch(&cli.command, decimals)
}

/// Parses arguments, runs, and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ErrorKind::Config.exit_code()
            } else {
                0
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.kind.exit_code()
        }
    }
}
