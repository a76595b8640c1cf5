//! `chronomem` — command-line front end and HTTP service for the external
//! temporal memory engine.
//!
//! The binary runs fully offline by default: embeddings come from the
//! deterministic hashing embedder and replies from the evidence-grounded
//! mock client (optionally primed with `--answer-key`). Point
//! `CHRONOMEM_MODEL_URL` / `CHRONOMEM_EMBED_URL` at HTTP services to use a
//! real model or embedder instead.

mod commands;
mod evalcmd;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chronomem",
    version,
    about = "External temporal memory governance for long-horizon dialogue",
    propagate_version = true
)]
struct Cli {
    /// Root directory for the knowledge store, sessions, and logs.
    #[arg(long, global = true, default_value = "chronomem-data")]
    data_dir: PathBuf,
    /// Engine configuration file (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest documents into the knowledge store.
    Ingest(commands::IngestArgs),
    /// Run a single dialogue turn in a session (created on first use).
    Ask(commands::AskArgs),
    /// Session-level operations.
    Session {
        #[command(subcommand)]
        command: SessionCommand,
    },
    /// Hand a session to a different model identity.
    Handoff(commands::HandoffArgs),
    /// Rebuild a session from its logs and print the transcript.
    Replay(commands::ReplayArgs),
    /// Evaluation harness: corpora, sweeps, component matrix, reports.
    Eval(evalcmd::EvalArgs),
    /// Serve the engine over HTTP.
    Serve(serve::ServeArgs),
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Run a scripted multi-turn session from a text file (one user input
    /// per line; blank lines and lines starting with '#' are skipped).
    Run(commands::SessionRunArgs),
}

/// Shared identity arguments for commands that may create a session.
///
/// Ids equal to the literal words `user` or `assistant` double up with the
/// role markers in the augmented query and dilute dialogue retrieval, so
/// the defaults deliberately avoid them.
#[derive(Args, Clone)]
pub struct MetaArgs {
    /// User id recorded on new sessions and used for retrieval bonuses.
    #[arg(long, default_value = "me")]
    user: String,
    /// Assistant/character id recorded on new sessions.
    #[arg(long, default_value = "aide")]
    character: String,
    /// Persona preamble for new sessions.
    #[arg(long, default_value = "You are a helpful assistant with external memory.")]
    persona: String,
    /// Model identity label for new sessions.
    #[arg(long, default_value = "mock")]
    model: String,
    /// Disable the rolling in-context window on new sessions.
    #[arg(long)]
    no_window: bool,
}

impl MetaArgs {
    pub fn to_meta(&self, session_id: &str) -> chronomem::SessionMeta {
        chronomem::SessionMeta {
            session_id: session_id.to_string(),
            user_id: self.user.clone(),
            character_id: self.character.clone(),
            persona: self.persona.clone(),
            model_identity: self.model.clone(),
            window_enabled: !self.no_window,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(&cli.data_dir, cli.config.as_deref(), &args),
        Command::Ask(args) => commands::ask(&cli.data_dir, cli.config.as_deref(), &args),
        Command::Session {
            command: SessionCommand::Run(args),
        } => commands::session_run(&cli.data_dir, cli.config.as_deref(), &args),
        Command::Handoff(args) => commands::handoff(&cli.data_dir, cli.config.as_deref(), &args),
        Command::Replay(args) => commands::replay(&cli.data_dir, cli.config.as_deref(), &args),
        Command::Eval(args) => evalcmd::run(cli.config.as_deref(), &args),
        Command::Serve(args) => serve::run(&cli.data_dir, cli.config.as_deref(), &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
