//! HTTP routes.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reqagent_agents::Pipeline;
use reqagent_core::clock::Clock;
use reqagent_core::export::{backlog_csv, ExportError};
use reqagent_core::{
    AgentRole, FeedbackEntry, PrioritizationTechnique, ProjectDescription, RunConfig, Satisfaction,
    SessionRecord,
};
use reqagent_gateway::Gateway;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::registry::ModelRegistry;
use crate::store::{SessionHandle, SessionSink, SessionState, SessionStore};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub registry: ModelRegistry,
    pub gateway: Gateway,
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn invalid_config(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_config", message)
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session '{id}'"),
        )
    }

    fn storage(e: std::io::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "message": self.message})),
        )
            .into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/models", get(models))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", get(stream_events))
        .route("/sessions/{id}/backlog.csv", get(export_csv))
        .route("/sessions/{id}/feedback", post(record_feedback))
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn models(State(state): State<AppState>) -> Json<Value> {
    Json(
        json!({"models": state.registry.names(), "techniques": PrioritizationTechnique::ALL.map(|t| t.slug())}),
    )
}

#[derive(Debug, Deserialize)]
struct ProjectInput {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    body: String,
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    project: ProjectInput,
    model: String,
    #[serde(default)]
    techniques: Option<Vec<String>>,
    /// Per-agent model overrides keyed by role.
    #[serde(default)]
    agent_models: BTreeMap<String, String>,
}

fn run_config(registry: &ModelRegistry, req: &CreateRequest) -> Result<RunConfig, ApiError> {
    let model = registry
        .resolve(&req.model)
        .map_err(ApiError::invalid_config)?;
    let techniques = match &req.techniques {
        None => PrioritizationTechnique::ALL.to_vec(),
        Some(list) => list
            .iter()
            .map(|t| t.parse::<PrioritizationTechnique>())
            .collect::<Result<_, _>>()
            .map_err(|e| ApiError::invalid_config(e.to_string()))?,
    };
    let mut config = RunConfig::new(model, techniques);
    for (role, name) in &req.agent_models {
        let role: AgentRole = role
            .parse()
            .map_err(|e: reqagent_core::DomainError| ApiError::invalid_config(e.to_string()))?;
        config.agent_models.insert(
            role,
            registry.resolve(name).map_err(ApiError::invalid_config)?,
        );
    }
    config
        .validate()
        .map_err(|e| ApiError::invalid_config(e.to_string()))?;
    Ok(config)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::invalid_config(format!("request body: {e}")))?;
    let config = run_config(&state.registry, &req)?;
    let id = format!("S-{}", uuid::Uuid::new_v4().simple());
    let project = ProjectDescription::new(
        req.project.id.unwrap_or_else(|| id.clone()),
        req.project
            .title
            .unwrap_or_else(|| "Untitled project".into()),
        req.project.body,
    )
    .map_err(|e| ApiError::invalid_config(e.to_string()))?;
    let handle = state
        .store
        .create(SessionRecord::new(id.clone(), project, config))
        .map_err(ApiError::storage)?;
    tokio::spawn(run_pipeline(state, handle));
    Ok((
        StatusCode::CREATED,
        Json(json!({"id": id, "state": SessionState::Created})),
    )
        .into_response())
}

/// One worker per session.
pub async fn run_pipeline(state: AppState, handle: Arc<SessionHandle>) {
    if let Err(e) = handle.set_state(SessionState::Running) {
        eprintln!("session {}: {e}", handle.id());
    }
    let sink = Arc::new(SessionSink::new(handle.clone(), state.clock.clone()));
    let mut pipeline = Pipeline::new(state.gateway.clone(), state.clock.clone(), sink.clone());
    if let Some(embed) = state.registry.embed_model() {
        pipeline = pipeline.with_embed_model(embed.clone());
    }
    let mut record = handle.record();
    let outcome = pipeline.run(&mut record).await;
    let final_state = if outcome.is_ok() {
        SessionState::Completed
    } else {
        SessionState::Failed
    };
    if let Err(e) = handle.finish(record, final_state) {
        eprintln!("session {}: {e}", handle.id());
    }
    sink.release();
}

fn session(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::unknown_session(id))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let view = session(&state, &id)?.view();
    Ok(Json(serde_json::to_value(view).expect("views serialize")))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: u64,
}

/// NDJSON: replay from the cursor, then follow until a terminal event.
async fn stream_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Response, ApiError> {
    let handle = session(&state, &id)?;
    let rx = handle.subscribe();
    let stream = futures::stream::unfold(Some((handle, q.from, rx)), |cursor| async move {
        let (handle, mut from, mut rx) = cursor?;
        loop {
            let (batch, done) = handle.replay(from);
            if let Some(last) = batch.last() {
                from = last.sequence_no + 1;
                let mut out = String::new();
                for event in &batch {
                    out.push_str(&serde_json::to_string(event).expect("events serialize"));
                    out.push('\n');
                }
                let next = (!done).then_some((handle, from, rx));
                return Some((Ok::<_, Infallible>(Bytes::from(out)), next));
            }
            if done || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(stream),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    technique: String,
}

async fn export_csv(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let handle = session(&state, &id)?;
    let technique: PrioritizationTechnique =
        q.technique
            .parse()
            .map_err(|e: reqagent_core::DomainError| {
                ApiError::new(StatusCode::BAD_REQUEST, "unknown_technique", e.to_string())
            })?;
    let csv = backlog_csv(&handle.record(), technique).map_err(|e| match e {
        ExportError::NotReady { .. } => {
            ApiError::new(StatusCode::CONFLICT, "not_ready", e.to_string())
        }
        ExportError::UnknownSession { .. } => ApiError::unknown_session(&id),
    })?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn record_feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let handle = session(&state, &id)?;
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))?;
    let text = |field: &str| value.get(field).and_then(Value::as_str).map(str::to_string);
    let satisfaction: Satisfaction = text("satisfaction").unwrap_or_default().parse().map_err(
        |e: reqagent_core::DomainError| {
            ApiError::new(StatusCode::BAD_REQUEST, "invalid_enum", e.to_string())
        },
    )?;
    let (Some(practitioner_role), Some(experience)) =
        (text("practitioner_role"), text("experience"))
    else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            "practitioner_role and experience are required",
        ));
    };
    let entry = FeedbackEntry {
        practitioner_role,
        experience,
        satisfaction,
        comment: text("comment").unwrap_or_default(),
        suggestion: text("suggestion").unwrap_or_default(),
    };
    let stored = handle.add_feedback(entry).map_err(ApiError::storage)?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}
