mod commands;
mod config;
mod pipeline;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use gprn_core::error::ErrorKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "gprn",
    version,
    about = "Corpus curation and benchmark contamination audits"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Validate and report without writing outputs.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Where to write the run report (default: next to the output).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Recompute quality statistics into document metadata.
    Enrich(commands::IoArgs),
    /// Drop documents that violate heuristic rules.
    Filter(commands::FilterArgs),
    /// Keep the three quality buckets, then the top fraction by score.
    Gate(commands::GateArgs),
    /// Two-stage MinHash near-duplicate removal.
    Dedup(commands::DedupArgs),
    /// Sample documents from sources following a phase schedule.
    Mix(commands::MixArgs),
    /// Tokenize, shuffle-buffer and pack into fixed-length sequences.
    Pack(commands::PackArgs),
    /// Build an exact-match n-gram index.
    Index(commands::IndexArgs),
    /// Count benchmark samples found in an index.
    Contam(commands::ContamArgs),
    /// Split a benchmark into contaminated and clean parts.
    Split(commands::SplitArgs),
    /// Accuracy gap between contaminated and clean splits.
    Gap(commands::GapArgs),
    /// Rank benchmark needles hidden in a document haystack.
    Biahs(commands::BiahsArgs),
    /// Schedule (and optionally inject) poison documents.
    Poison(commands::PoisonArgs),
    /// Solve the contamination game for one parameter set.
    Game(commands::GameArgs),
    /// Solve the game across values of one parameter.
    Sweep(commands::SweepArgs),
    /// Run enrich, filter, gate, dedup, mix and pack from one recipe.
    Pipeline(pipeline::PipelineArgs),
    /// Generate synthetic corpora and benchmark files.
    Synth(commands::SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SynthKind {
    Corpus,
    Benchmark,
    Needles,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if e.kind() == clap::error::ErrorKind::UnknownArgument {
                if let Some(sub) = std::env::args().nth(1) {
                    if let Some(cmd) = Cli::command().find_subcommand_mut(&sub) {
                        eprintln!("\n{}", cmd.render_help());
                    }
                }
            }
            return ExitCode::from(code as u8);
        }
    };
    let name = commands::command_name(&cli.command).to_string();
    match commands::run(cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.kind() == ErrorKind::Usage {
                if let Some(cmd) = Cli::command().find_subcommand_mut(&name) {
                    eprintln!(
                        "\n{}",
                        cmd.render_usage()
                            .to_string()
                            .replacen("Usage: ", "Usage: gprn ", 1)
                    );
                }
            }
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
