//! HTTP and WebSocket API behind the operator console.
//!
//! ```text
//! POST /api/sessions                   {mode, seed?, driver?, reasoning?, world?} -> {session_id, state}
//! GET  /api/sessions/{id}/state
//! POST /api/sessions/{id}/instruction  {text}
//! POST /api/sessions/{id}/officer      {signal}        poc sessions only
//! POST /api/sessions/{id}/step
//! POST /api/sessions/{id}/reset        {seed?}
//! GET  /api/sessions/{id}/transcript
//! GET  /ws/sessions/{id}               {type: state|decision|violation, payload}
//! ```
//!
//! Each session sits behind its own async mutex, so commands against one
//! session apply in arrival order while sessions proceed independently.
//! Errors come back as `{"error": {"code", "message"}}` with a 4xx status.

pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use drivebench_core::driver::{run_driver, DriverError};
use drivebench_core::poc::OfficerSignal;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex, RwLock};

use crate::config::HarnessConfig;
use crate::drivers::DriverSpec;
use session::{Applied, Mode, Session, SessionError, World};

struct Handle {
    session: Mutex<Session>,
    events: broadcast::Sender<String>,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<HarnessConfig>,
    sessions: Arc<RwLock<HashMap<String, Arc<Handle>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(config: HarnessConfig) -> Self {
        AppState {
            config: Arc::new(config),
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    async fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "not_found",
                format!("no session {id:?}"),
            )
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/instruction", post(post_instruction))
        .route("/api/sessions/{id}/officer", post(post_officer))
        .route("/api/sessions/{id}/step", post(post_step))
        .route("/api/sessions/{id}/reset", post(post_reset))
        .route("/api/sessions/{id}/transcript", get(get_transcript))
        .route("/ws/sessions/{id}", get(ws_session))
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
        })
        .with_state(state)
}

/// Serves until the process is interrupted.
pub async fn serve(addr: SocketAddr, config: HarnessConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match e {
            SessionError::ModeMismatch => (StatusCode::CONFLICT, "mode_mismatch"),
            SessionError::Ended => (StatusCode::CONFLICT, "session_ended"),
            SessionError::EmptyInstruction | SessionError::BadWorld(_) => {
                (StatusCode::BAD_REQUEST, "bad_request")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<DriverError> for ApiError {
    fn from(e: DriverError) -> Self {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "driver_error",
            e.to_string(),
        )
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn event(kind: &str, payload: impl serde::Serialize) -> String {
    json!({"type": kind, "payload": payload}).to_string()
}

fn publish_state(handle: &Handle, session: &Session) -> Value {
    let view = serde_json::to_value(session.view()).expect("views serialize");
    let _ = handle.events.send(event("state", &view));
    view
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    mode: Mode,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_driver")]
    driver: DriverSpec,
    #[serde(default)]
    reasoning: bool,
    /// Start from this world instead of the seed's.
    #[serde(default)]
    world: Option<World>,
}

fn default_driver() -> DriverSpec {
    DriverSpec::Oracle
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let config = app.config.clone();
    let spec = body.driver.clone();
    let driver = tokio::task::spawn_blocking(move || spec.build(&config))
        .await
        .expect("driver construction does not panic")
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "driver_error", e.to_string()))?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::SeqCst));
    let session = Session::new(
        id.clone(),
        body.mode,
        body.seed,
        body.driver,
        driver,
        app.config.prompt(body.reasoning),
        app.config.policy,
        body.world,
    )?;
    let view = serde_json::to_value(session.view()).expect("views serialize");
    let (events, _) = broadcast::channel(256);
    let handle = Arc::new(Handle {
        session: Mutex::new(session),
        events,
    });
    app.sessions.write().await.insert(id.clone(), handle);
    Ok(Json(json!({"session_id": id, "state": view})))
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let handle = app.handle(&id).await?;
    let session = handle.session.lock().await;
    Ok(Json(
        serde_json::to_value(session.view()).expect("views serialize"),
    ))
}

async fn get_transcript(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let handle = app.handle(&id).await?;
    let session = handle.session.lock().await;
    Ok(Json(
        json!({"session_id": id, "transcripts": session.history()}),
    ))
}

/// Asks the driver, applies the answer, and streams what happened.
async fn decide(handle: &Handle, session: &mut Session) -> Result<Applied, ApiError> {
    let request = session.next_request()?;
    let driver = session.driver.clone();
    let transcript = tokio::task::spawn_blocking(move || run_driver(&*driver, request))
        .await
        .expect("driver call does not panic")?;
    let applied = session.apply(transcript);
    let _ = handle.events.send(event("decision", &applied.decision));
    for v in &applied.new_violations {
        let _ = handle.events.send(event("violation", v));
    }
    Ok(applied)
}

fn outcome(state: Value, applied: Option<&Applied>) -> Value {
    match applied {
        Some(a) => json!({
            "state": state,
            "decision": a.decision,
            "violations": a.new_violations,
        }),
        None => json!({"state": state}),
    }
}

#[derive(Deserialize)]
struct InstructionBody {
    text: String,
}

/// Poc sessions answer an instruction immediately; highway sessions keep it
/// for the next step.
async fn post_instruction(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<InstructionBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let handle = app.handle(&id).await?;
    let mut session = handle.session.lock().await;
    session.set_instruction(&body.text)?;
    let applied = match session.mode {
        Mode::Poc => Some(decide(&handle, &mut session).await?),
        Mode::Highway => None,
    };
    let state = publish_state(&handle, &session);
    Ok(Json(outcome(state, applied.as_ref())))
}

#[derive(Deserialize)]
struct OfficerBody {
    signal: String,
}

async fn post_officer(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<OfficerBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let signal: OfficerSignal = body.signal.parse().map_err(ApiError::bad_request)?;
    let handle = app.handle(&id).await?;
    let mut session = handle.session.lock().await;
    session.set_officer(signal)?;
    let state = publish_state(&handle, &session);
    Ok(Json(outcome(state, None)))
}

async fn post_step(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let handle = app.handle(&id).await?;
    let mut session = handle.session.lock().await;
    let applied = decide(&handle, &mut session).await?;
    let state = publish_state(&handle, &session);
    Ok(Json(outcome(state, Some(&applied))))
}

#[derive(Deserialize, Default)]
struct ResetBody {
    #[serde(default)]
    seed: Option<u64>,
}

async fn post_reset(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<ResetBody>>,
) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let handle = app.handle(&id).await?;
    let mut session = handle.session.lock().await;
    session.reset(body.seed)?;
    let state = publish_state(&handle, &session);
    Ok(Json(outcome(state, None)))
}

async fn ws_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = app.handle(&id).await?;
    Ok(upgrade.on_upgrade(move |socket| stream_events(socket, handle)))
}

async fn stream_events(mut socket: WebSocket, handle: Arc<Handle>) {
    let (mut rx, first) = {
        let session = handle.session.lock().await;
        let view = serde_json::to_value(session.view()).expect("views serialize");
        (handle.events.subscribe(), event("state", view))
    };
    if socket.send(Message::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
