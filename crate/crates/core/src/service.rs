//! HTTP service for interactive debugging: assemble a system from the
//! registry, talk to it turn by turn, inspect every stage's output, and
//! rerun the latest turn from a corrected stage output.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use uuid::Uuid;

use crate::act::DialogueAct;
use crate::belief::BeliefState;
use crate::dialogue::Message;
use crate::pipeline::{AgentError, AgentState, PipelineAgent, Stage, StageOverride, StageTrace};
use crate::registry::{Registry, Selection};
use crate::session::build_system_agent;

/// Error body: `{code, message, field_path?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            field_path: None,
        }
    }

    fn at(mut self, path: impl Into<String>) -> Self {
        let path = path.into();
        self.field_path = (!path.is_empty() && path != ".").then_some(path);
        self
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        match &e {
            AgentError::TypeMismatch { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "type_mismatch", e.to_string()),
            AgentError::Stage { stage, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "stage_failed", e.to_string()).at(stage.as_str())
            }
        }
    }
}

/// Parses a JSON body, reporting the path of the first offending field.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let code = if inner.is_syntax() || inner.is_eof() { "malformed_json" } else { "schema_validation" };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, inner.to_string()).at(path)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingUser,
    Closed,
}

struct LiveSession {
    agent: PipelineAgent,
    selections: std::collections::BTreeMap<String, String>,
    history: Vec<StageTrace>,
    /// Agent state before the most recent turn.
    before_last: Option<AgentState>,
    status: SessionStatus,
}

#[derive(Clone)]
pub struct AppState {
    registry: Arc<Registry>,
    sessions: Arc<Mutex<HashMap<Uuid, Arc<Mutex<LiveSession>>>>>,
}

impl AppState {
    pub fn new(registry: Registry) -> Self {
        AppState {
            registry: Arc::new(registry),
            sessions: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ApiError> {
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::unknown_session(id))?;
        self.sessions
            .lock()
            .await
            .get(&uuid)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }
}

#[derive(Debug, Serialize)]
struct RegistryView<'a> {
    stages: std::collections::BTreeMap<Stage, &'a [crate::registry::StageOption]>,
    packs: Vec<PackView<'a>>,
}

#[derive(Debug, Serialize)]
struct PackView<'a> {
    name: &'a str,
    display_name: &'a str,
    domains: Vec<&'a str>,
}

async fn list_registry(State(app): State<AppState>) -> Json<serde_json::Value> {
    let registry = &app.registry;
    let view = RegistryView {
        stages: Stage::ALL.into_iter().map(|s| (s, registry.options(s))).collect(),
        packs: registry
            .file()
            .packs
            .iter()
            .map(|p| PackView {
                name: &p.name,
                display_name: &p.display_name,
                domains: registry
                    .pack(&p.name)
                    .map(|pack| pack.database.domain_names().collect())
                    .unwrap_or_default(),
            })
            .collect(),
    };
    Json(serde_json::to_value(view).expect("registry view serializes"))
}

/// JSON Schemas of each stage's output, used to validate edits client-side.
pub fn stage_schemas() -> serde_json::Value {
    let act = json!({
        "description": "Dialogue act as Intent-Domain-Slot-Value or a 4-string array",
        "oneOf": [
            { "type": "string", "pattern": "^(Inform|Request|Recommend|NoOffer|Greet|Bye)-[^-]+(-[^-]+(-.+)?)?$" },
            { "type": "array", "items": { "type": "string" }, "minItems": 4, "maxItems": 4 }
        ]
    });
    let acts = json!({ "type": "array", "items": act });
    let belief = json!({
        "type": "object",
        "required": ["domains"],
        "properties": {
            "domains": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "properties": {
                        "constraints": { "type": "object", "additionalProperties": { "type": "string" } },
                        "requested": { "type": "array", "items": { "type": "string" }, "uniqueItems": true },
                        "recommended": { "type": ["string", "null"] }
                    }
                }
            },
            "active_domain": { "type": ["string", "null"] }
        }
    });
    json!({
        "nlu": acts,
        "dst": belief,
        "policy": acts,
        "nlg": { "type": "string" }
    })
}

async fn schemas() -> Json<serde_json::Value> {
    Json(stage_schemas())
}

#[derive(Debug, Serialize)]
struct Created {
    id: String,
    status: SessionStatus,
    selections: std::collections::BTreeMap<String, String>,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let selection: Selection = if body.iter().all(u8::is_ascii_whitespace) {
        Selection::default()
    } else {
        parse_body(&body)?
    };
    let assembly = app.registry.assemble(&selection).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_selection", e.to_string()).at(e.field().to_string())
    })?;
    let mut agent = build_system_agent(assembly.pack.clone(), &assembly.system)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_selection", e.to_string()))?;
    agent.init_session(None);
    let id = Uuid::new_v4();
    let session = LiveSession {
        agent,
        selections: assembly.names.clone(),
        history: Vec::new(),
        before_last: None,
        status: SessionStatus::AwaitingUser,
    };
    app.sessions.lock().await.insert(id, Arc::new(Mutex::new(session)));
    let created = Created {
        id: id.to_string(),
        status: SessionStatus::AwaitingUser,
        selections: assembly.names,
    };
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

/// Turn body: text for agents with an NLU stage, acts otherwise.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRequest {
    #[serde(default)]
    utterance: Option<String>,
    #[serde(default)]
    acts: Option<Vec<DialogueAct>>,
}

async fn post_turn(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<StageTrace>, ApiError> {
    let request: TurnRequest = parse_body(&body)?;
    let observation = match (request.utterance, request.acts) {
        (Some(text), None) => Message::Text(text),
        (None, Some(acts)) => Message::Acts(acts),
        _ => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "schema_validation",
                "give exactly one of utterance or acts",
            ))
        }
    };
    let session = app.session(&id).await?;
    let mut session = session.lock().await;
    if session.status != SessionStatus::AwaitingUser {
        return Err(ApiError::new(StatusCode::CONFLICT, "wrong_status", "session is closed"));
    }
    let before = session.agent.snapshot();
    let (_, trace) = session.agent.respond(&observation)?;
    session.before_last = Some(before);
    session.history.push(trace.clone());
    Ok(Json(trace))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideRequest {
    stage: Stage,
    output: serde_json::Value,
}

fn parse_override(body: &[u8]) -> Result<StageOverride, ApiError> {
    let request: OverrideRequest = parse_body(body)?;
    let raw = serde_json::to_vec(&request.output).expect("value serializes");
    let nested = |e: ApiError| {
        let path = match e.field_path {
            Some(p) if p.starts_with('[') => format!("output{p}"),
            Some(p) => format!("output.{p}"),
            None => "output".to_string(),
        };
        ApiError { field_path: Some(path), ..e }
    };
    Ok(match request.stage {
        Stage::Nlu => StageOverride::Nlu(parse_body::<Vec<DialogueAct>>(&raw).map_err(nested)?),
        Stage::Dst => StageOverride::Dst(parse_body::<BeliefState>(&raw).map_err(nested)?),
        Stage::Policy => StageOverride::Policy(parse_body::<Vec<DialogueAct>>(&raw).map_err(nested)?),
        Stage::Nlg => StageOverride::Nlg(parse_body::<String>(&raw).map_err(nested)?),
    })
}

async fn override_last(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StageTrace>, ApiError> {
    let replacement = parse_override(&body)?;
    let session = app.session(&id).await?;
    let mut session = session.lock().await;
    if session.status != SessionStatus::AwaitingUser {
        return Err(ApiError::new(StatusCode::CONFLICT, "wrong_status", "session is closed"));
    }
    let (Some(before), Some(last)) = (session.before_last.clone(), session.history.last().cloned()) else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no_turn_to_correct", "no turn has been taken yet"));
    };
    let after = session.agent.snapshot();
    session.agent.restore(before);
    match session.agent.respond_with(&last.input, Some(replacement)) {
        Ok((_, trace)) => {
            *session.history.last_mut().expect("history is non-empty") = trace.clone();
            Ok(Json(trace))
        }
        Err(e) => {
            session.agent.restore(after);
            Err(e.into())
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct History {
    pub id: String,
    pub status: SessionStatus,
    pub selections: std::collections::BTreeMap<String, String>,
    pub turns: Vec<StageTrace>,
}

async fn get_history(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<History>, ApiError> {
    let session = app.session(&id).await?;
    let session = session.lock().await;
    Ok(Json(History {
        id,
        status: session.status,
        selections: session.selections.clone(),
        turns: session.history.clone(),
    }))
}

async fn close_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let session = app.session(&id).await?;
    let mut session = session.lock().await;
    session.status = SessionStatus::Closed;
    Ok(Json(json!({ "id": id, "status": SessionStatus::Closed })))
}

/// The API routes; with `ui_dir`, static UI assets are served for every
/// other path.
pub fn router(app: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/registry", get(list_registry))
        .route("/schemas", get(schemas))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/turns/last/override", post(override_last))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}", axum::routing::delete(close_session))
        .with_state(app);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}
