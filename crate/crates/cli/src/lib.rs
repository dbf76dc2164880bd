//! The `assimlab` command line: study configuration, count collection and
//! the analysis subcommands.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod context;
pub mod data;
pub mod error;
pub mod output;
pub mod sim;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::CollectOptions;
pub use config::{BackendKind, Study, StudyConfig};
pub use context::RunOptions;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "assimlab", version, about = "Assimilation ratios from marginal audience counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct StudyArgs {
    /// Study configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Count endpoint for the http backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Compute from an incomplete snapshot, flagging what is missing.
    #[arg(long)]
    pub allow_partial: bool,
}

impl From<&StudyArgs> for RunOptions {
    fn from(a: &StudyArgs) -> Self {
        RunOptions {
            config: a.config.clone(),
            seed: a.seed,
            out: a.out.clone(),
            backend: a.backend,
            endpoint: a.endpoint.clone(),
            allow_partial: a.allow_partial,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct ScenarioArgs {
    /// Take the scenario from a study configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario: study, blocs, identity or random.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub interests: Option<usize>,
    #[arg(long)]
    pub scale: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significant digits of reported counts.
    #[arg(long)]
    pub rounding: Option<u32>,
    /// Smallest reported count.
    #[arg(long)]
    pub floor: Option<u64>,
}

impl From<&ScenarioArgs> for sim::ScenarioSource {
    fn from(a: &ScenarioArgs) -> Self {
        sim::ScenarioSource {
            config: a.config.clone(),
            scenario: a.scenario.clone(),
            preset: a.preset.clone(),
            interests: a.interests,
            scale: a.scale,
            seed: a.seed,
            rounding: a.rounding,
            floor: a.floor,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan every query the study needs and fetch it into the snapshot.
    Collect {
        #[command(flatten)]
        study: StudyArgs,
        /// Refuse plans with more queries than this.
        #[arg(long)]
        budget: Option<usize>,
        /// Request rate, e.g. 200/60s.
        #[arg(long)]
        rate: Option<String>,
        /// Continue an interrupted snapshot instead of starting over.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare proxy demographics with ground truth.
    Validate(StudyArgs),
    /// Filter interests and score assimilation per pair.
    Ar(StudyArgs),
    /// Grouped medians with bootstrap intervals and Kruskal-Wallis tests.
    Compare(StudyArgs),
    /// Kernel density of log assimilation ratios per pair.
    Kde(StudyArgs),
    /// Regress cell-level log assimilation on demographics.
    Regress(StudyArgs),
    /// Synthetic worlds.
    Sim {
        #[command(subcommand)]
        action: SimAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimAction {
    /// Write a scenario (and, for the study preset, its inputs) to a directory.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Answer count requests over HTTP.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:8787")]
        addr: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Collect { .. } => "collect",
            Command::Validate(_) => "validate",
            Command::Ar(_) => "ar",
            Command::Compare(_) => "compare",
            Command::Kde(_) => "kde",
            Command::Regress(_) => "regress",
            Command::Sim {
                action: SimAction::Generate { .. },
            } => "sim generate",
            Command::Sim {
                action: SimAction::Serve { .. },
            } => "sim serve",
        }
    }
}

/// Runs one command; returns the artifacts written.
pub fn run(command: &Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Collect {
            study,
            budget,
            rate,
            resume,
        } => commands::collect(
            &study.into(),
            &CollectOptions {
                budget: *budget,
                rate: rate.clone(),
                resume: resume.clone(),
            },
        ),
        Command::Validate(a) => commands::validate(&a.into()),
        Command::Ar(a) => commands::ar(&a.into()),
        Command::Compare(a) => commands::compare(&a.into()),
        Command::Kde(a) => commands::kde(&a.into()),
        Command::Regress(a) => commands::regress(&a.into()),
        Command::Sim { action } => match action {
            SimAction::Generate { scenario, out } => sim::generate(&scenario.into(), out),
            SimAction::Serve { scenario, addr } => sim::run_server(&scenario.into(), addr).map(|_| Vec::new()),
        },
    }
}

/// Parses `args`, runs, prints written paths or an error document, and
/// returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.document(cli.command.name()));
            e.exit_code()
        }
    }
}
