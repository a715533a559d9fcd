//! `novex`: a command-line workbench for fine-grained patent novelty
//! examination. Claims are segmented into features, features are checked
//! against a single prior art document, and the protocol is scored on
//! passage retrieval, novel feature identification, and claim
//! classification.

mod commands;
mod render;
mod store;

use anyhow::Result;
use clap::{Parser, Subcommand};
use commands::{Ctx, Method, RunArgs, SplitArg};
use novex_core::config::Config;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "novex", version, about = "patent novelty examination workbench")]
struct Cli {
    /// Directory all relative paths and stores resolve against.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,

    /// TOML config file. NW_* environment variables override it, and flags
    /// override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for everything random: generation, splitting, baselines,
    /// sampling workflows.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (two records per application).
    Synth {
        /// Applications to synthesize; each yields an initial and a granted
        /// claim record.
        #[arg(long, default_value_t = 100)]
        applications: usize,
        /// Output directory for records.jsonl and documents.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Make granted claims much longer than initial ones, planting a
        /// claim-length shortcut that `prepare` must remove.
        #[arg(long)]
        skew: bool,
        /// Do not plant reference numerals in granted claims.
        #[arg(long)]
        no_numerals: bool,
        /// Unrelated filler paragraphs per prior art document.
        #[arg(long, default_value_t = 3)]
        filler: usize,
    },
    /// Validate raw record and document files and store them as the working
    /// corpus. Any violation rejects the batch.
    Ingest {
        #[arg(long, default_value = "synth/records.jsonl")]
        records: PathBuf,
        #[arg(long, default_value = "synth/documents.jsonl")]
        documents: PathBuf,
    },
    /// Strip reference numerals, balance labels within claim-length bins,
    /// split by application, and mark the adversarial test subset.
    Prepare,
    /// Examine one split with a method, streaming predictions to
    /// runs/<run-id>/predictions.jsonl. Re-running the same run id resumes.
    Run {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Defaults to <method>-<split>-s<seed>.
        #[arg(long)]
        run_id: Option<String>,
        /// Scripted-client fixture file; replaces the chat endpoint for the
        /// workflow methods so they run offline.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Records examined concurrently.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Score a run: retrieval on not-novel records, novel feature
    /// identification on novel records, classification on all.
    Eval {
        /// Run id, run directory, or prediction file.
        run: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Pairwise Cohen's kappa between runs on the test split and its
    /// adversarial subset.
    Agree {
        /// Two or more run ids, run directories, or prediction files.
        runs: Vec<String>,
        /// Where to write the matrices (default agreement.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Dies quietly when stdout closes early (piping into `head`), like other
/// line-oriented tools, instead of panicking on the failed write.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let config_path = cli.config.map(|p| store::resolve(&cli.workspace, &p));
    let mut config = Config::load(config_path.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Ctx { workspace: cli.workspace, config };
    match cli.command {
        Command::Synth { applications, out, skew, no_numerals, filler } => {
            commands::cmd_synth(&ctx, applications, out.as_deref(), skew, no_numerals, filler)
        }
        Command::Ingest { records, documents } => commands::cmd_ingest(&ctx, &records, &documents),
        Command::Prepare => commands::cmd_prepare(&ctx),
        Command::Run { method, split, run_id, fixture, jobs } => {
            commands::cmd_run(&ctx, &RunArgs { method, split, run_id, fixture, jobs })
        }
        Command::Eval { run, split } => commands::cmd_eval(&ctx, &run, split),
        Command::Agree { runs, out } => commands::cmd_agree(&ctx, &runs, out.as_deref()),
    }
}
