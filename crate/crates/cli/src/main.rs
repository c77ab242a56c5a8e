use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use girder_cli::commands::{self, Dirs, StudyKind};
use girder_cli::{Overrides, RunConfig};
use girder_core::error::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "girder", version, about = "Overloaded-vehicle identification from bridge responses")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Directory holding upstream artifacts; defaults to the output directory.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Bridge preset: sbm, cbm or a preset file.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Traffic seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Noise level on normalized responses.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Target section, one-based.
    #[arg(long, global = true)]
    section: Option<usize>,
    /// Worker threads for independent jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the traffic automaton.
    Simulate,
    /// Compute sensor responses from the trajectory.
    Synthesize,
    /// Label, normalize, window and split the responses.
    BuildDataset,
    /// Train the configured model.
    Train,
    /// Score a checkpoint on the test split.
    Evaluate {
        /// Checkpoint to score; defaults to checkpoint.json in the input directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run an experiment protocol.
    Study {
        #[command(subcommand)]
        kind: StudyCommand,
    },
    /// Print the resolved configuration as TOML.
    Config,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum StudyCommand {
    /// Compare approaches on every study section.
    Sections,
    /// Sweep the noise level on the target section.
    Noise,
    /// False positives caused by overloads on adjacent sections.
    NeighborFp,
    /// False positives caused by heavy but legal totals on the target.
    WeightFp,
    /// Average vehicles per section for candidate section lengths.
    SectionLength,
}

impl From<StudyCommand> for StudyKind {
    fn from(c: StudyCommand) -> Self {
        match c {
            StudyCommand::Sections => StudyKind::Sections,
            StudyCommand::Noise => StudyKind::Noise,
            StudyCommand::NeighborFp => StudyKind::NeighborFp,
            StudyCommand::WeightFp => StudyKind::WeightFp,
            StudyCommand::SectionLength => StudyKind::SectionLength,
        }
    }
}

fn run(cli: Cli) -> girder_core::Result<()> {
    let overrides = Overrides {
        preset: cli.preset,
        seed: cli.seed,
        sigma: cli.sigma,
        section: cli.section,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| girder_core::Error::Config(format!("thread pool: {e}")))?;
    }
    let dirs = Dirs {
        input: cli.input.unwrap_or_else(|| cli.out.clone()),
        out: cli.out,
    };
    log::debug!("configuration digest {}", cfg.digest()?);
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &dirs),
        Command::Synthesize => commands::synthesize_cmd(&cfg, &dirs),
        Command::BuildDataset => commands::build_dataset_cmd(&cfg, &dirs),
        Command::Train => commands::train(&cfg, &dirs).map(drop),
        Command::Evaluate { checkpoint } => {
            let report = commands::evaluate(&cfg, &dirs, checkpoint.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Study { kind } => commands::study(&cfg, &dirs, kind.into()),
        Command::Config => {
            let text = toml::to_string(&cfg).map_err(|e| girder_core::Error::Config(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            })
        }
    }
}
