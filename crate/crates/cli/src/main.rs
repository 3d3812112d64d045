use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gptatlas_cli::pipeline::StageOutcome;
use gptatlas_cli::{run, RunOptions, Stage};

#[derive(Parser)]
#[command(name = "gptatlas", version, about = "Research-geography pipeline over local paper, institute and company dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "gptatlas.toml")]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rerun the selected stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    stage_force: bool,
    /// Seed for the classifier validation split; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input files and write rejection reports.
    Ingest,
    /// Match affiliation strings against the institute registry.
    Link,
    /// Assign institutes and companies to regions.
    Geocode,
    /// Preprocess abstracts and flag DL papers.
    Label,
    /// Subject co-occurrence and research-industry relatedness.
    Relate,
    /// RCA tables, trends and concentration diagnostics.
    Metrics,
    /// Regional drivers regression.
    Regress,
    /// Write report files and the manifest.
    Report,
    /// Every stage in dependency order.
    All,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stages: Vec<Stage> = match cli.command {
        Command::Ingest => vec![Stage::Ingest],
        Command::Link => vec![Stage::Link],
        Command::Geocode => vec![Stage::Geocode],
        Command::Label => vec![Stage::Label],
        Command::Relate => vec![Stage::Relate],
        Command::Metrics => vec![Stage::Metrics],
        Command::Regress => vec![Stage::Regress],
        Command::Report => vec![Stage::Report],
        Command::All => Stage::ORDER.to_vec(),
    };
    let opts = RunOptions {
        config: cli.config,
        out: cli.out,
        force: cli.stage_force,
        seed: cli.seed,
    };
    match run(&stages, &opts) {
        Ok(done) => {
            for (stage, outcome) in done {
                let what = match outcome {
                    StageOutcome::Ran => "done",
                    StageOutcome::Skipped => "up to date",
                };
                eprintln!("{}: {what}", stage.name());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
