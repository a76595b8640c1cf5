//! HTTP front end: the engine behind four JSON endpoints.
//!
//! - `POST /sessions` — create a session from a full session-meta body.
//! - `POST /sessions/{id}/turns` — run one turn, returning the complete
//!   turn record (same schema the JSONL log stores).
//! - `POST /sessions/{id}/handoff` — switch model identity, optionally
//!   clearing the in-context window.
//! - `GET /sessions/{id}/log` — the session's full turn log.
//!
//! Engine work runs on blocking threads behind one mutex, which serializes
//! turns globally — strictly stronger than the per-session serialization
//! the engine requires, and plenty for a desk-scale service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use serde::{Deserialize, Serialize};

use chronomem::{Engine, EngineError, Session, SessionMeta, TurnRecord};

use crate::commands;

#[derive(Args)]
pub struct ServeArgs {
    /// Address to bind, e.g. 127.0.0.1:3000 (port 0 picks a free port).
    #[arg(long, default_value = "127.0.0.1:3000")]
    addr: String,
    /// JSON file of [pattern, answer] pairs priming the offline mock.
    #[arg(long)]
    answer_key: Option<PathBuf>,
}

struct Inner {
    engine: Engine,
    sessions: BTreeMap<String, Session>,
}

struct AppState {
    inner: Mutex<Inner>,
    data_dir: PathBuf,
    answer_key: Option<PathBuf>,
}

type Shared = Arc<AppState>;

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error_response(e: EngineError) -> Response {
    let status = match &e {
        EngineError::SessionNotFound(_) => StatusCode::NOT_FOUND,
        EngineError::SessionExists(_) => StatusCode::CONFLICT,
        EngineError::InvalidConfig(_)
        | EngineError::EmptyInput(_)
        | EngineError::EmptyDocument
        | EngineError::Json(_) => StatusCode::BAD_REQUEST,
        EngineError::Model(_) => StatusCode::BAD_GATEWAY,
        EngineError::Io { .. } if is_missing_file(&e) => StatusCode::NOT_FOUND,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    (status, Json(ErrorBody { error: e.to_string() })).into_response()
}

fn is_missing_file(e: &EngineError) -> bool {
    matches!(e, EngineError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
}

/// Runs blocking engine work on a dedicated thread and converts the
/// outcome to a response.
async fn blocking<T, F>(work: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<(StatusCode, T), EngineError> + Send + 'static,
{
    match tokio::task::spawn_blocking(work).await {
        Ok(Ok((status, body))) => (status, Json(body)).into_response(),
        Ok(Err(e)) => error_response(e),
        Err(join) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(ErrorBody { error: format!("worker panicked: {join}") }),
        )
            .into_response(),
    }
}

/// Wire-side session body. Kept separate from [`SessionMeta`] so the HTTP
/// contract can reject unknown fields without making the persisted metadata
/// file brittle to read.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionRequest {
    session_id: String,
    user_id: String,
    character_id: String,
    persona: String,
    model_identity: String,
    #[serde(default = "default_window")]
    window_enabled: bool,
}

fn default_window() -> bool {
    true
}

async fn create_session(
    State(state): State<Shared>,
    Json(req): Json<CreateSessionRequest>,
) -> Response {
    blocking(move || {
        let meta = SessionMeta {
            session_id: req.session_id,
            user_id: req.user_id,
            character_id: req.character_id,
            persona: req.persona,
            model_identity: req.model_identity,
            window_enabled: req.window_enabled,
        };
        let mut guard = lock(&state)?;
        let session = guard.engine.create_session(&meta)?;
        let created = session.meta().clone();
        guard.sessions.insert(meta.session_id.clone(), session);
        Ok((StatusCode::CREATED, created))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRequest {
    input: String,
}

fn lock(state: &Shared) -> Result<std::sync::MutexGuard<'_, Inner>, EngineError> {
    state
        .inner
        .lock()
        .map_err(|_| EngineError::InvalidConfig("engine state poisoned by a panic".to_string()))
}

/// Fetches the session from the cache, opening it from disk on first use.
fn session_entry<'a>(
    engine: &Engine,
    sessions: &'a mut BTreeMap<String, Session>,
    session_id: &str,
) -> Result<&'a mut Session, EngineError> {
    if !sessions.contains_key(session_id) {
        let session = engine.open_session(session_id)?;
        sessions.insert(session_id.to_string(), session);
    }
    Ok(sessions.get_mut(session_id).expect("session inserted above"))
}

async fn run_turn(
    State(state): State<Shared>,
    UrlPath(session_id): UrlPath<String>,
    Json(req): Json<TurnRequest>,
) -> Response {
    blocking(move || {
        let mut guard = lock(&state)?;
        let Inner { engine, sessions } = &mut *guard;
        let session = session_entry(engine, sessions, &session_id)?;
        let client = commands::pick_model(
            &session.meta().model_identity,
            state.answer_key.as_deref(),
            engine.config().model_timeout_secs,
        )?;
        let record = engine.run_turn(session, client.as_ref(), &req.input)?;
        Ok((StatusCode::OK, record))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HandoffRequest {
    to_identity: String,
    #[serde(default = "default_clear")]
    clear_context: bool,
}

fn default_clear() -> bool {
    true
}

#[derive(Serialize)]
struct HandoffResponse {
    session_id: String,
    from_identity: String,
    to_identity: String,
    cleared_context: bool,
    round: u32,
}

async fn handoff(
    State(state): State<Shared>,
    UrlPath(session_id): UrlPath<String>,
    Json(req): Json<HandoffRequest>,
) -> Response {
    blocking(move || {
        let mut guard = lock(&state)?;
        let Inner { engine, sessions } = &mut *guard;
        let session = session_entry(engine, sessions, &session_id)?;
        let from_identity = session.meta().model_identity.clone();
        engine.handoff(session, &req.to_identity, req.clear_context)?;
        Ok((
            StatusCode::OK,
            HandoffResponse {
                session_id,
                from_identity,
                to_identity: req.to_identity,
                cleared_context: req.clear_context,
                round: session.round(),
            },
        ))
    })
    .await
}

async fn get_log(State(state): State<Shared>, UrlPath(session_id): UrlPath<String>) -> Response {
    blocking(move || {
        let dir = state.data_dir.join("sessions").join(&session_id);
        if !dir.is_dir() {
            return Err(EngineError::SessionNotFound(session_id));
        }
        let records: Vec<TurnRecord> = chronomem::jsonl::read_all(&dir.join("turns.jsonl"))?;
        Ok((StatusCode::OK, records))
    })
    .await
}

fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(run_turn))
        .route("/sessions/{id}/handoff", post(handoff))
        .route("/sessions/{id}/log", get(get_log))
        .with_state(state)
}

pub fn run(data_dir: &Path, config: Option<&Path>, args: &ServeArgs) -> Result<(), EngineError> {
    let engine = commands::open_engine(data_dir, config)?;
    let state: Shared = Arc::new(AppState {
        inner: Mutex::new(Inner {
            engine,
            sessions: BTreeMap::new(),
        }),
        data_dir: data_dir.to_path_buf(),
        answer_key: args.answer_key.clone(),
    });
    let app = router(state);
    let addr = args.addr.clone();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| EngineError::io(Path::new("<tokio>"), e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| EngineError::io(Path::new(&addr), e))?;
        let local = listener
            .local_addr()
            .map_err(|e| EngineError::io(Path::new(&addr), e))?;
        println!("listening on {local}");
        use std::io::Write as _;
        let _ = std::io::stdout().flush();
        axum::serve(listener, app)
            .await
            .map_err(|e| EngineError::io(Path::new(&addr), e))
    })
}
