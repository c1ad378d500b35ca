// SPDX-License-Identifier: Apache-2.0

//! `seufsm` command-line frontend.
//!
//! Logs go to standard error; verbosity comes from `-v` flags or the
//! `SEUFSM_LOG` environment variable (env_logger filter syntax).

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seufsm::extract::DEFAULT_THETA;
use seufsm::stg::{DEFAULT_MAX_STATE_BITS, DEFAULT_MAX_TOTAL_BITS};

pub const LOG_ENV: &str = "SEUFSM_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "seufsm",
    version,
    about = "FSM extraction and upset analysis for .bench netlists"
)]
struct Cli {
    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full pipeline over every candidate: graph, classes, loops, upsets, reports.
    Analyze(AnalyzeArgs),
    /// Register groups and extracted candidates.
    Extract(CommonArgs),
    /// State transition graph and classification of one candidate.
    Stg(StgArgs),
    /// Upset injection and output exposure of one candidate.
    Seu(SeuArgs),
    /// Reachability query with an optional stimulus file.
    Reach(ReachArgs),
    /// Re-encode a candidate and synthesize a new netlist.
    Reencode(ReencodeArgs),
    /// Write DOT, GraphML and/or JSON for one candidate.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Input netlist (.bench).
    pub input: PathBuf,
    /// Directory for written artifacts.
    #[arg(long, default_value = "seufsm-out")]
    pub out_dir: PathBuf,
    /// Clustering threshold.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    /// File listing flip-flop output nets (one per line) forming the only candidate.
    #[arg(long)]
    pub group_file: Option<PathBuf>,
    /// Candidate index in clustering order.
    #[arg(long)]
    pub candidate: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_STATE_BITS)]
    pub max_state_bits: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_TOTAL_BITS)]
    pub max_total_bits: usize,
    /// Reset state (binary MSB-first or 0x hex); repeatable. Defaults to power-up values.
    #[arg(long)]
    pub reset: Vec<String>,
    /// Explicit legal set: one state per line.
    #[arg(long)]
    pub legal_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Upset multiplicity.
    #[arg(long, default_value_t = 1)]
    pub seu_k: usize,
    /// Exit with status 1 when any candidate has IRRECOVERABLE or DEADLOCK states.
    #[arg(long)]
    pub fail_on_trap: bool,
    /// Draw every state even above the size threshold.
    #[arg(long)]
    pub full_graph: bool,
}

#[derive(Debug, Args)]
pub struct StgArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub full_graph: bool,
    #[arg(long)]
    pub fail_on_trap: bool,
}

#[derive(Debug, Args)]
pub struct SeuArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    pub seu_k: usize,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Target state; repeatable.
    #[arg(long, required = true)]
    pub target: Vec<String>,
    /// Source state; repeatable. Defaults to the reset states.
    #[arg(long)]
    pub source: Vec<String>,
    /// Allowed single-bit upsets along the path.
    #[arg(long, default_value_t = 0)]
    pub budget: u32,
    #[arg(long)]
    pub max_cycles: Option<u64>,
    /// Write the witness as a stimulus file (relative to the output directory).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReencodeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// binary, gray, onehot or hamming3.
    #[arg(long, default_value = "hamming3")]
    pub scheme: seufsm::Scheme,
    /// Import the encoding table instead of generating one.
    #[arg(long, conflicts_with = "scheme")]
    pub table: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Graphml,
    Json,
    All,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = Format::All)]
    pub format: Format,
    #[arg(long)]
    pub full_graph: bool,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let env = env_logger::Env::new().filter_or(LOG_ENV, default);
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Stg(a) => commands::stg(&a),
        Command::Seu(a) => commands::seu(&a),
        Command::Reach(a) => commands::reach(&a),
        Command::Reencode(a) => commands::reencode(&a),
        Command::Export(a) => commands::export(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
