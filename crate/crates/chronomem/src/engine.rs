//! The governance engine: owns the shared knowledge store and the clock,
//! and drives sessions through the full turn pipeline — query augmentation,
//! dual-route retrieval, temporal reranking, chronological evidence
//! unfolding, budgeted prompt assembly, the tagged-output repair loop, and
//! atomic white-box logging with dialogue write-back.
//!
//! A session's durable state is three files under
//! `sessions/<id>/`: `meta.json` (identity and window setting, rewritten
//! atomically), `turns.jsonl` (one record per round), and `events.jsonl`
//! (handoffs and anomalies). Opening a session replays `turns.jsonl` to
//! rebuild its dialogue memory and recent window, so a process restart — or
//! a model handoff — loses nothing that was durably logged.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::{epoch_to_iso_date, Clock};
use crate::config::EngineConfig;
use crate::embed::Embedder;
use crate::error::{EngineError, ModelError};
use crate::evidence::{build_prompt, merge_routes, template_version, unfold_chronologically, PromptInputs};
use crate::jsonl::CrashPoint;
use crate::log::{EventLog, SessionEvent, TurnLog, TurnRecord};
use crate::model::ModelClient;
use crate::protocol::{repair_loop, ComplianceReport};
use crate::retrieval::{
    augment_query, retrieve_experience, retrieve_knowledge, QueryContext, Route,
};
use crate::store::{ExperienceStore, IngestMeta, IngestReceipt, KnowledgeStore};

/// Durable per-session identity and settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub user_id: String,
    pub character_id: String,
    /// Persona text for the prompt's system section.
    pub persona: String,
    /// Identity of the model currently serving the session.
    pub model_identity: String,
    /// Whether the rolling dialogue window is rendered into prompts.
    pub window_enabled: bool,
}

/// A live session: replayable dialogue memory plus open logs. Obtained from
/// [`Engine::create_session`] / [`Engine::open_session`]; a detached replay
/// probe (no logs, nothing persisted) comes from [`Engine::replay_session`].
pub struct Session {
    meta: SessionMeta,
    round: u32,
    experience: ExperienceStore,
    turn_log: Option<TurnLog>,
    event_log: Option<EventLog>,
    window: VecDeque<(String, String)>,
    last_turn_ts: u64,
}

impl Session {
    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn experience_len(&self) -> usize {
        self.experience.len()
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// True when nothing will be persisted (replay probe).
    pub fn is_detached(&self) -> bool {
        self.turn_log.is_none()
    }

    fn ingest_meta(&self) -> IngestMeta {
        IngestMeta {
            session_id: self.meta.session_id.clone(),
            user_id: self.meta.user_id.clone(),
            character_id: self.meta.character_id.clone(),
            source_label: "chat".to_string(),
        }
    }

    fn query_context(&self) -> QueryContext {
        QueryContext {
            session_id: self.meta.session_id.clone(),
            user_id: self.meta.user_id.clone(),
            character_id: self.meta.character_id.clone(),
        }
    }
}

pub struct Engine {
    config: EngineConfig,
    clock: Arc<dyn Clock>,
    embedder: Arc<dyn Embedder>,
    knowledge: KnowledgeStore,
    data_dir: PathBuf,
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T, fsync: bool) -> Result<(), EngineError> {
    let bytes = serde_json::to_vec_pretty(value)?;
    let tmp = path.with_extension("json.tmp");
    {
        use std::io::Write as _;
        let mut f = fs::File::create(&tmp).map_err(|e| EngineError::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| EngineError::io(&tmp, e))?;
        if fsync {
            f.sync_all().map_err(|e| EngineError::io(&tmp, e))?;
        }
    }
    fs::rename(&tmp, path).map_err(|e| EngineError::io(path, e))?;
    Ok(())
}

fn validate_session_id(id: &str) -> Result<(), EngineError> {
    if id.is_empty() {
        return Err(EngineError::EmptyInput("session_id"));
    }
    if id.contains(['/', '\\', '.']) {
        return Err(EngineError::InvalidConfig(format!(
            "session id may not contain path characters: {id:?}"
        )));
    }
    Ok(())
}

impl Engine {
    /// Opens an engine rooted at `data_dir`, loading any previously ingested
    /// knowledge from `knowledge.jsonl`.
    pub fn new(
        config: EngineConfig,
        clock: Arc<dyn Clock>,
        embedder: Arc<dyn Embedder>,
        data_dir: &Path,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        fs::create_dir_all(data_dir).map_err(|e| EngineError::io(data_dir, e))?;
        let knowledge = KnowledgeStore::open(&data_dir.join("knowledge.jsonl"), Arc::clone(&embedder), config.fsync)?;
        Ok(Self {
            config,
            clock,
            embedder,
            knowledge,
            data_dir: data_dir.to_path_buf(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn knowledge(&mut self) -> &mut KnowledgeStore {
        &mut self.knowledge
    }

    fn session_dir(&self, session_id: &str) -> PathBuf {
        self.data_dir.join("sessions").join(session_id)
    }

    /// Ingests one document into the shared knowledge store, stamped with
    /// the current clock time.
    pub fn ingest_document(&mut self, text: &str, meta: &IngestMeta) -> Result<IngestReceipt, EngineError> {
        let ts = self.clock.now_epoch_secs();
        self.knowledge
            .ingest_document(text, meta, &self.config.chunking.clone(), ts, 0)
    }

    /// Creates a new durable session. Fails if the id is already taken.
    pub fn create_session(&self, meta: &SessionMeta) -> Result<Session, EngineError> {
        validate_session_id(&meta.session_id)?;
        let dir = self.session_dir(&meta.session_id);
        let meta_path = dir.join("meta.json");
        if meta_path.exists() {
            return Err(EngineError::SessionExists(meta.session_id.clone()));
        }
        fs::create_dir_all(&dir).map_err(|e| EngineError::io(&dir, e))?;
        write_json_atomic(&meta_path, meta, self.config.fsync)?;
        let (turn_log, _) = TurnLog::open(&dir.join("turns.jsonl"), self.config.fsync)?;
        let event_log = EventLog::open(&dir.join("events.jsonl"), self.config.fsync)?;
        Ok(Session {
            meta: meta.clone(),
            round: 0,
            experience: ExperienceStore::new(Arc::clone(&self.embedder)),
            turn_log: Some(turn_log),
            event_log: Some(event_log),
            window: VecDeque::new(),
            last_turn_ts: 0,
        })
    }

    /// Opens an existing session, replaying its turn log to rebuild
    /// dialogue memory, the recent window, and the round counter.
    pub fn open_session(&self, session_id: &str) -> Result<Session, EngineError> {
        validate_session_id(session_id)?;
        let dir = self.session_dir(session_id);
        let meta_path = dir.join("meta.json");
        if !meta_path.exists() {
            return Err(EngineError::SessionNotFound(session_id.to_string()));
        }
        let raw = fs::read_to_string(&meta_path).map_err(|e| EngineError::io(&meta_path, e))?;
        let meta: SessionMeta = serde_json::from_str(&raw)?;
        let (turn_log, records) = TurnLog::open(&dir.join("turns.jsonl"), self.config.fsync)?;
        let event_log = EventLog::open(&dir.join("events.jsonl"), self.config.fsync)?;
        let mut session = Session {
            meta,
            round: 0,
            experience: ExperienceStore::new(Arc::clone(&self.embedder)),
            turn_log: Some(turn_log),
            event_log: Some(event_log),
            window: VecDeque::new(),
            last_turn_ts: 0,
        };
        self.replay_records(&mut session, &records)?;
        Ok(session)
    }

    /// Detached replay probe: rebuilds the session as it stood after the
    /// first `prefix` turns. Nothing it does afterwards is persisted.
    pub fn replay_session(&self, session_id: &str, prefix: usize) -> Result<Session, EngineError> {
        validate_session_id(session_id)?;
        let dir = self.session_dir(session_id);
        let meta_path = dir.join("meta.json");
        if !meta_path.exists() {
            return Err(EngineError::SessionNotFound(session_id.to_string()));
        }
        let raw = fs::read_to_string(&meta_path).map_err(|e| EngineError::io(&meta_path, e))?;
        let meta: SessionMeta = serde_json::from_str(&raw)?;
        let (_, records) = TurnLog::open(&dir.join("turns.jsonl"), self.config.fsync)?;
        if prefix > records.len() {
            return Err(EngineError::PrefixOutOfRange {
                prefix,
                available: records.len(),
            });
        }
        let mut session = Session {
            meta,
            round: 0,
            experience: ExperienceStore::new(Arc::clone(&self.embedder)),
            turn_log: None,
            event_log: None,
            window: VecDeque::new(),
            last_turn_ts: 0,
        };
        self.replay_records(&mut session, &records[..prefix])?;
        Ok(session)
    }

    fn replay_records(&self, session: &mut Session, records: &[TurnRecord]) -> Result<(), EngineError> {
        let meta = session.ingest_meta();
        for r in records {
            session.experience.insert_chunk(
                &r.user_input,
                &meta,
                &session.meta.user_id,
                &session.meta.character_id,
                r.timestamp,
                r.round,
            )?;
            if r.anomaly.is_none() {
                session.experience.insert_chunk(
                    &r.assistant_reply,
                    &meta,
                    &session.meta.user_id,
                    &session.meta.character_id,
                    r.timestamp,
                    r.round,
                )?;
                if session.meta.window_enabled {
                    session.window.push_back((r.user_input.clone(), r.assistant_reply.clone()));
                    while session.window.len() > self.config.window_turns {
                        session.window.pop_front();
                    }
                }
            }
            session.round = r.round;
            session.last_turn_ts = r.timestamp;
        }
        Ok(())
    }

    /// Runs one full dialogue turn. A model timeout is not an error: the
    /// turn is recorded with an `anomaly` marker, the user's half is still
    /// written back to memory, and the round advances.
    pub fn run_turn(
        &mut self,
        session: &mut Session,
        client: &dyn ModelClient,
        user_input: &str,
    ) -> Result<TurnRecord, EngineError> {
        self.run_turn_inner(session, client, user_input, None)
    }

    /// Test seam: identical to [`Engine::run_turn`] but aborts the log
    /// append at the given crash point, exactly as a process crash would.
    pub fn run_turn_crashing(
        &mut self,
        session: &mut Session,
        client: &dyn ModelClient,
        user_input: &str,
        crash: CrashPoint,
    ) -> Result<TurnRecord, EngineError> {
        self.run_turn_inner(session, client, user_input, Some(crash))
    }

    fn run_turn_inner(
        &mut self,
        session: &mut Session,
        client: &dyn ModelClient,
        user_input: &str,
        crash: Option<CrashPoint>,
    ) -> Result<TurnRecord, EngineError> {
        if user_input.trim().is_empty() {
            return Err(EngineError::EmptyInput("user_input"));
        }
        let round = session.round + 1;
        let now = self.clock.now_epoch_secs();
        let augmented = augment_query(user_input, &session.meta.user_id, &session.meta.character_id)?;
        let qctx = session.query_context();

        let ksnap = self.knowledge.snapshot();
        let esnap = session.experience.snapshot();
        let mut k_cands = retrieve_knowledge(
            &ksnap,
            self.embedder.as_ref(),
            &augmented,
            &qctx,
            self.config.quotas.knowledge_k,
            &self.config,
        )?;
        let mut e_cands = retrieve_experience(
            &esnap,
            self.embedder.as_ref(),
            &augmented,
            &qctx,
            self.config.quotas.chat_history_k,
            &self.config,
        )?;

        let tctx = crate::temporal::TemporalContext {
            now_epoch_secs: now,
            current_round: round,
        };
        crate::temporal::rerank_route(
            &mut k_cands,
            &tctx,
            &self.config.temporal.params_for(Route::Knowledge),
            self.config.toggles.enable_temporal,
        );
        crate::temporal::rerank_route(
            &mut e_cands,
            &tctx,
            &self.config.temporal.params_for(Route::Experience),
            self.config.toggles.enable_temporal,
        );

        let merged = merge_routes(k_cands, e_cands, &self.config.quotas);
        let items = unfold_chronologically(&merged, round);
        let newest_evidence = merged.iter().map(|c| c.timestamp).max().unwrap_or(0);
        let as_of = match newest_evidence.max(session.last_turn_ts) {
            0 => now,
            t => t,
        };
        let window_owned: Vec<(String, String)> = if session.meta.window_enabled {
            session.window.iter().cloned().collect()
        } else {
            Vec::new()
        };
        let build = build_prompt(PromptInputs {
            persona: &session.meta.persona,
            window: &window_owned,
            items,
            question: user_input,
            as_of_date: &epoch_to_iso_date(as_of),
            strong: self.config.toggles.strong_protocol,
            budget_chars: self.config.prompt_budget_chars,
        });

        let record = match repair_loop(client, &build.prompt, self.config.max_repairs) {
            Ok(outcome) => TurnRecord {
                chunk_id: TurnRecord::chunk_id_for_round(round),
                session_id: session.meta.session_id.clone(),
                user_input: user_input.to_string(),
                assistant_reply: outcome.parsed.response.clone(),
                source_type: crate::chunk::SourceType::Experience,
                timestamp: now,
                round,
                candidates: merged,
                analysis_text: outcome.parsed.analysis.clone(),
                compliance: ComplianceReport {
                    has_analysis_tag: outcome.parsed.has_analysis_tag,
                    has_response_tag: outcome.parsed.has_response_tag,
                    analysis_length_chars: outcome
                        .parsed
                        .analysis
                        .as_ref()
                        .map(|a| a.chars().count() as u64)
                        .unwrap_or(0),
                    repair_count: outcome.repair_count,
                    truncations: build.truncations,
                },
                augmented_query: augmented.clone(),
                model_identity: client.identity().to_string(),
                template_version: build.template_version.clone(),
                anomaly: None,
            },
            Err(ModelError::Timeout(_)) => TurnRecord {
                chunk_id: TurnRecord::chunk_id_for_round(round),
                session_id: session.meta.session_id.clone(),
                user_input: user_input.to_string(),
                assistant_reply: String::new(),
                source_type: crate::chunk::SourceType::Experience,
                timestamp: now,
                round,
                candidates: merged,
                analysis_text: None,
                compliance: ComplianceReport {
                    has_analysis_tag: false,
                    has_response_tag: false,
                    analysis_length_chars: 0,
                    repair_count: 0,
                    truncations: build.truncations,
                },
                augmented_query: augmented.clone(),
                model_identity: client.identity().to_string(),
                template_version: template_version(self.config.toggles.strong_protocol).to_string(),
                anomaly: Some("timeout".to_string()),
            },
            Err(other) => return Err(EngineError::Model(other)),
        };

        // Durability first: the turn is logged before memory mutates, so a
        // crash can never leave memory ahead of the log.
        if let Some(log) = session.turn_log.as_mut() {
            match crash {
                Some(point) => log.append_crashing(&record, point)?,
                None => log.append(&record)?,
            }
        }
        if record.anomaly.is_some() {
            if let Some(events) = session.event_log.as_mut() {
                events.append(&SessionEvent::InvocationAnomaly {
                    timestamp: now,
                    round,
                    kind: record.anomaly.clone().unwrap_or_default(),
                    detail: format!("model call failed on round {round}"),
                })?;
            }
        }

        // Write-back: the user's half always becomes memory; the
        // assistant's half only when the turn produced a reply.
        let imeta = session.ingest_meta();
        session.experience.insert_chunk(
            user_input,
            &imeta,
            &session.meta.user_id,
            &session.meta.character_id,
            now,
            round,
        )?;
        if record.anomaly.is_none() {
            session.experience.insert_chunk(
                &record.assistant_reply,
                &imeta,
                &session.meta.user_id,
                &session.meta.character_id,
                now,
                round,
            )?;
            if session.meta.window_enabled {
                session
                    .window
                    .push_back((user_input.to_string(), record.assistant_reply.clone()));
                while session.window.len() > self.config.window_turns {
                    session.window.pop_front();
                }
            }
        }
        session.round = round;
        session.last_turn_ts = now;
        Ok(record)
    }

    /// Hands the session to a different model identity. With
    /// `clear_context` the rolling window is wiped and disabled durably —
    /// continuity must then come from retrieved memory alone.
    pub fn handoff(
        &self,
        session: &mut Session,
        to_identity: &str,
        clear_context: bool,
    ) -> Result<(), EngineError> {
        if to_identity.is_empty() {
            return Err(EngineError::EmptyInput("to_identity"));
        }
        let now = self.clock.now_epoch_secs();
        let event = SessionEvent::Handoff {
            timestamp: now,
            round: session.round,
            from_identity: session.meta.model_identity.clone(),
            to_identity: to_identity.to_string(),
            cleared_context: clear_context,
        };
        if let Some(events) = session.event_log.as_mut() {
            events.append(&event)?;
        }
        session.meta.model_identity = to_identity.to_string();
        if clear_context {
            session.window.clear();
            session.meta.window_enabled = false;
        }
        if !session.is_detached() {
            let dir = self.session_dir(&session.meta.session_id);
            write_json_atomic(&dir.join("meta.json"), &session.meta, self.config.fsync)?;
        }
        Ok(())
    }

    /// Events recorded for a session (handoffs, anomalies).
    pub fn read_events(&self, session: &Session) -> Result<Vec<SessionEvent>, EngineError> {
        match &session.event_log {
            Some(log) => log.read_all(),
            None => Ok(Vec::new()),
        }
    }
}
