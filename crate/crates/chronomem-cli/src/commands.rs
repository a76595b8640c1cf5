//! Engine-facing subcommands: ingest, ask, session run, handoff, replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;

use chronomem::model::ENV_MODEL_URL;
use chronomem::{
    Clock, Embedder, Engine, EngineConfig, EngineError, EvidenceGroundedMock, HashingEmbedder,
    HttpEmbedder, HttpModelClient, IngestMeta, ModelClient, Session, SystemClock, TurnRecord,
};

use crate::MetaArgs;

/// Loads the engine configuration, falling back to defaults.
pub fn load_config(config: Option<&Path>) -> Result<EngineConfig, EngineError> {
    match config {
        Some(path) => EngineConfig::from_json_file(path),
        None => Ok(EngineConfig::default()),
    }
}

/// Hashing embedder by default; `CHRONOMEM_EMBED_URL` switches to the HTTP
/// adapter.
pub fn pick_embedder(cfg: &EngineConfig) -> Arc<dyn Embedder> {
    match HttpEmbedder::from_env(cfg.embed_dim, cfg.model_timeout_secs) {
        Some(http) => Arc::new(http),
        None => Arc::new(HashingEmbedder::new(cfg.embed_dim)),
    }
}

/// Evidence-grounded mock by default (primed from `answer_key` when given);
/// `CHRONOMEM_MODEL_URL` switches to the HTTP completion client.
pub fn pick_model(
    identity: &str,
    answer_key: Option<&Path>,
    timeout_secs: u64,
) -> Result<Box<dyn ModelClient>, EngineError> {
    if let Ok(url) = std::env::var(ENV_MODEL_URL) {
        return Ok(Box::new(HttpModelClient::new(
            identity,
            &url,
            Duration::from_secs(timeout_secs),
        )));
    }
    let mut mock = EvidenceGroundedMock::new(identity);
    if let Some(path) = answer_key {
        let raw = fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        let pairs: Vec<(String, String)> = serde_json::from_str(&raw)?;
        mock = mock.with_answers(&pairs);
    }
    Ok(Box::new(mock))
}

pub fn open_engine(data_dir: &Path, config: Option<&Path>) -> Result<Engine, EngineError> {
    let cfg = load_config(config)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let embedder = pick_embedder(&cfg);
    Engine::new(cfg, clock, embedder, data_dir)
}

fn open_or_create(engine: &Engine, meta: &chronomem::SessionMeta) -> Result<Session, EngineError> {
    match engine.open_session(&meta.session_id) {
        Ok(s) => Ok(s),
        Err(EngineError::SessionNotFound(_)) => engine.create_session(meta),
        Err(e) => Err(e),
    }
}

fn print_turn(record: &TurnRecord, show_evidence: bool, json: bool) -> Result<(), EngineError> {
    if json {
        println!("{}", serde_json::to_string_pretty(record)?);
        return Ok(());
    }
    if show_evidence {
        println!("evidence ({} candidates):", record.candidates.len());
        for (rank, c) in record.candidates.iter().enumerate() {
            let text: String = c.text.chars().take(60).collect();
            println!(
                "  {:>2}. [{}] {} final={:.4} base={:.4} r{} t{}  {}",
                rank + 1,
                c.route.as_str(),
                c.delivered_id(),
                c.final_score,
                c.base_score,
                c.round,
                c.timestamp,
                text
            );
        }
    }
    if let Some(anomaly) = &record.anomaly {
        println!("anomaly: {anomaly}");
    }
    println!("[{} r{}] {}", record.model_identity, record.round, record.assistant_reply);
    Ok(())
}

#[derive(Args)]
pub struct IngestArgs {
    /// Files to ingest (each becomes one document). Reads stdin when empty.
    #[arg(long = "file", value_name = "PATH")]
    files: Vec<PathBuf>,
    /// Source label stored on every chunk (defaults to the file name).
    #[arg(long)]
    source_label: Option<String>,
    /// Attribute the documents to this user id.
    #[arg(long, default_value = "")]
    user: String,
    /// Attribute the documents to this character id.
    #[arg(long, default_value = "")]
    character: String,
}

pub fn ingest(data_dir: &Path, config: Option<&Path>, args: &IngestArgs) -> Result<(), EngineError> {
    let mut engine = open_engine(data_dir, config)?;
    let mut docs: Vec<(String, String)> = Vec::new();
    if args.files.is_empty() {
        let mut text = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut text)
            .map_err(|e| EngineError::io(Path::new("<stdin>"), e))?;
        docs.push(("stdin".to_string(), text));
    } else {
        for path in &args.files {
            let text = fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
            let label = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            docs.push((label, text));
        }
    }
    for (label, text) in &docs {
        let meta = IngestMeta {
            session_id: String::new(),
            user_id: args.user.clone(),
            character_id: args.character.clone(),
            source_label: args.source_label.clone().unwrap_or_else(|| label.clone()),
        };
        let receipt = engine.ingest_document(text, &meta)?;
        println!(
            "{label}: {} parent chunk(s), {} child chunk(s), first id {}",
            receipt.parent_ids.len(),
            receipt.child_ids.len(),
            receipt.parent_ids.first().map(String::as_str).unwrap_or("-")
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct AskArgs {
    /// Session to run the turn in; created if it does not exist.
    #[arg(long)]
    session: String,
    /// The user input for this turn.
    input: String,
    #[command(flatten)]
    meta: MetaArgs,
    /// JSON file of [pattern, answer] pairs priming the offline mock.
    #[arg(long)]
    answer_key: Option<PathBuf>,
    /// Print the delivered evidence with scores before the reply.
    #[arg(long)]
    show_evidence: bool,
    /// Print the complete turn record as JSON instead of plain text.
    #[arg(long)]
    json: bool,
}

pub fn ask(data_dir: &Path, config: Option<&Path>, args: &AskArgs) -> Result<(), EngineError> {
    let mut engine = open_engine(data_dir, config)?;
    let mut session = open_or_create(&engine, &args.meta.to_meta(&args.session))?;
    let client = pick_model(
        &session.meta().model_identity,
        args.answer_key.as_deref(),
        engine.config().model_timeout_secs,
    )?;
    let record = engine.run_turn(&mut session, client.as_ref(), &args.input)?;
    print_turn(&record, args.show_evidence, args.json)
}

#[derive(Args)]
pub struct SessionRunArgs {
    /// Session to run the script in; created if it does not exist.
    #[arg(long)]
    session: String,
    /// Script file: one user input per line.
    #[arg(long)]
    script: PathBuf,
    #[command(flatten)]
    meta: MetaArgs,
    /// JSON file of [pattern, answer] pairs priming the offline mock.
    #[arg(long)]
    answer_key: Option<PathBuf>,
    /// Print each turn record as JSON.
    #[arg(long)]
    json: bool,
}

pub fn session_run(
    data_dir: &Path,
    config: Option<&Path>,
    args: &SessionRunArgs,
) -> Result<(), EngineError> {
    let mut engine = open_engine(data_dir, config)?;
    let mut session = open_or_create(&engine, &args.meta.to_meta(&args.session))?;
    let client = pick_model(
        &session.meta().model_identity,
        args.answer_key.as_deref(),
        engine.config().model_timeout_secs,
    )?;
    let raw = fs::read_to_string(&args.script).map_err(|e| EngineError::io(&args.script, e))?;
    let mut turns = 0_usize;
    let mut anomalies = 0_usize;
    for line in raw.lines() {
        let input = line.trim();
        if input.is_empty() || input.starts_with('#') {
            continue;
        }
        if !args.json {
            println!("[you r{}] {input}", session.round() + 1);
        }
        let record = engine.run_turn(&mut session, client.as_ref(), input)?;
        turns += 1;
        if record.anomaly.is_some() {
            anomalies += 1;
        }
        print_turn(&record, false, args.json)?;
    }
    println!("ran {turns} turn(s), {anomalies} anomaly(ies); session now at round {}", session.round());
    Ok(())
}

#[derive(Args)]
pub struct HandoffArgs {
    /// Session to hand off.
    #[arg(long)]
    session: String,
    /// Model identity that takes the session over.
    #[arg(long)]
    to: String,
    /// Keep the rolling in-context window (cleared and disabled by default,
    /// forcing continuity through retrieved memory).
    #[arg(long)]
    keep_context: bool,
}

pub fn handoff(data_dir: &Path, config: Option<&Path>, args: &HandoffArgs) -> Result<(), EngineError> {
    let engine = open_engine(data_dir, config)?;
    let mut session = engine.open_session(&args.session)?;
    let from = session.meta().model_identity.clone();
    engine.handoff(&mut session, &args.to, !args.keep_context)?;
    println!(
        "session {} handed from {from} to {} at round {}{}",
        args.session,
        args.to,
        session.round(),
        if args.keep_context { " (window kept)" } else { " (window cleared)" }
    );
    Ok(())
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Session to replay.
    #[arg(long)]
    session: String,
    /// Replay only the first N rounds (all by default).
    #[arg(long)]
    rounds: Option<usize>,
    /// Print full turn records as JSON instead of the transcript.
    #[arg(long)]
    json: bool,
}

pub fn replay(data_dir: &Path, config: Option<&Path>, args: &ReplayArgs) -> Result<(), EngineError> {
    let engine = open_engine(data_dir, config)?;
    let session = match args.rounds {
        Some(n) => engine.replay_session(&args.session, n)?,
        None => engine.open_session(&args.session)?,
    };
    let records: Vec<TurnRecord> = chronomem::jsonl::read_all(
        &data_dir.join("sessions").join(&args.session).join("turns.jsonl"),
    )?;
    let shown = args.rounds.unwrap_or(records.len()).min(records.len());
    for record in &records[..shown] {
        if args.json {
            println!("{}", serde_json::to_string(record)?);
        } else {
            println!("[you r{}] {}", record.round, record.user_input);
            println!("[{} r{}] {}", record.model_identity, record.round, record.assistant_reply);
        }
    }
    let meta = session.meta();
    println!(
        "session {}: round {}, model {}, window {} ({} turn(s) held), experience {} chunk(s)",
        meta.session_id,
        session.round(),
        meta.model_identity,
        if meta.window_enabled { "enabled" } else { "disabled" },
        session.window_len(),
        session.experience_len(),
    );
    for event in engine.read_events(&session)? {
        println!("event: {}", serde_json::to_string(&event)?);
    }
    Ok(())
}
