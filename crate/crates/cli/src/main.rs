//! `tandem`: command-line front end for the hybrid retrieval engine.
//!
//! One subcommand per pipeline stage: build the lexical index, generate
//! weak-supervision training shards, embed passages, search in lexical,
//! semantic, or hybrid mode, evaluate run files against qrels, and run
//! the diagnostic analyses.
//!
//! Exit codes: 0 on success, 1 when a command ran but produced an empty
//! result, 2 on usage or input errors.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd_analyze;
mod cmd_embed;
mod cmd_evaluate;
mod cmd_index;
mod cmd_search;
mod cmd_training;
mod manifest;
mod provider;
mod store;

/// Exit status for commands that ran but found nothing to output.
pub(crate) const EMPTY_RESULT: u8 = 1;

#[derive(Parser)]
#[command(
    name = "tandem",
    version,
    about = "Hybrid lexical + semantic document retrieval",
    arg_required_else_help = true
)]
struct Cli {
    /// Print the versioned table of engine defaults and exit.
    #[arg(long)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus and build the lexical index directory.
    Index(cmd_index::IndexArgs),
    /// Mine n-gram queries and write weak-supervision training shards.
    GenTraining(cmd_training::TrainingArgs),
    /// Embed corpus passages into a vector file (optionally with an IVF
    /// sidecar).
    Embed(cmd_embed::EmbedArgs),
    /// Run lexical, semantic, or hybrid retrieval over a query file.
    Search(cmd_search::SearchArgs),
    /// Score TREC run files against qrels and compare them.
    Evaluate(cmd_evaluate::EvaluateArgs),
    /// Slice runs into diagnostic tables and plot data.
    Analyze(cmd_analyze::AnalyzeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.show_config {
        print_config();
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required, see --help");
        return ExitCode::from(2);
    };
    let outcome = match command {
        Command::Index(a) => cmd_index::run(a),
        Command::GenTraining(a) => cmd_training::run(a),
        Command::Embed(a) => cmd_embed::run(a),
        Command::Search(a) => cmd_search::run(a),
        Command::Evaluate(a) => cmd_evaluate::run(a),
        Command::Analyze(a) => cmd_analyze::run(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn print_config() {
    let rows = tandem::defaults::table();
    let name_w = rows.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let value_w = rows.iter().map(|e| e.value.len()).max().unwrap_or(0);
    for e in rows {
        println!("{:<name_w$}  {:<value_w$}  {}", e.name, e.value, e.what);
    }
}
