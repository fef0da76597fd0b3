use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use nlground::grounder::GroundError;
use nlground::learner::{start_session, Answer, Choice, LearnerError, LearnerSession};
use nlground::{ground, Aid, AscKind, Environment, GroundingOptions, GroundingResult, MatcherKind, World};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::state::{AppState, Session};

pub const SCHEMA_VERSION: u32 = 1;

type Shared = State<Arc<AppState>>;

/// JSON extractor whose rejections use the service's error envelope.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Json<T>(pub T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(Debug)]
pub enum ApiError {
    UnknownSpec(String),
    UnknownSession(String),
    NoLearnerSession,
    BadRequest(String),
    Learner(LearnerError),
    Ground(GroundError),
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl From<LearnerError> for ApiError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Ground(g) => ApiError::Ground(g),
            other => ApiError::Learner(other),
        }
    }
}

impl From<GroundError> for ApiError {
    fn from(e: GroundError) -> Self {
        ApiError::Ground(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match &self {
            ApiError::UnknownSpec(n) => (StatusCode::NOT_FOUND, "unknown_spec", format!("no spec named {n:?}")),
            ApiError::UnknownSession(id) => (StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}")),
            ApiError::NoLearnerSession => {
                (StatusCode::CONFLICT, "no_learner_session", "no learner session is active".to_string())
            }
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m.clone()),
            ApiError::Learner(e) => {
                let (status, code) = match e {
                    LearnerError::InvalidState { .. } => (StatusCode::CONFLICT, "invalid_state"),
                    LearnerError::IndexOutOfRange { .. } => (StatusCode::BAD_REQUEST, "index_out_of_range"),
                    LearnerError::ArgumentMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "argument_mismatch"),
                    LearnerError::Store(_) | LearnerError::Ground(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
                };
                (status, code, e.to_string())
            }
            ApiError::Ground(e) => {
                let code = match e {
                    GroundError::Tag(_) => "tag_error",
                    GroundError::Engine(_) => "engine_error",
                };
                (StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
            }
        };
        let body = json!({"schema_version": SCHEMA_VERSION, "error": {"code": code, "message": message}});
        (status, axum::Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Wraps a payload with the schema version.
fn reply(mut body: Value) -> ApiResult {
    body["schema_version"] = json!(SCHEMA_VERSION);
    Ok(Json(body))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/specs", get(list_specs))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/ground", post(ground_command))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/learner", get(learner_state))
        .route("/sessions/{id}/learner/start", post(learner_start))
        .route("/sessions/{id}/learner/verify", post(learner_verify))
        .route("/sessions/{id}/learner/options", post(learner_options))
        .route("/sessions/{id}/learner/choose", post(learner_choose))
        .route("/sessions/{id}/learner/confirm", post(learner_confirm))
        .with_state(state)
}

async fn list_specs(State(app): Shared) -> ApiResult {
    let specs: Vec<Value> = app
        .stores
        .iter()
        .map(|(name, store)| {
            let engine = store.engine();
            json!({
                "name": name,
                "actions": engine.spec().pool(AscKind::Action).count(),
                "utilities": engine.spec().pool(AscKind::Utility).count(),
                "learned_templates": store.learned_count(),
            })
        })
        .collect();
    reply(json!({ "specs": specs }))
}

#[derive(Deserialize)]
struct CreateSession {
    spec_name: String,
    /// Starting state; defaults to an empty world.
    world: Option<World>,
}

async fn create_session(State(app): Shared, Json(req): Json<CreateSession>) -> ApiResult {
    if !app.stores.contains_key(&req.spec_name) {
        return Err(ApiError::UnknownSpec(req.spec_name));
    }
    let world = match req.world {
        Some(w) => w,
        None => World::for_app(&req.spec_name)
            .ok_or_else(|| ApiError::BadRequest(format!("{} has no default world; pass one", req.spec_name)))?,
    };
    let id = uuid::Uuid::new_v4().to_string();
    app.insert_session(Session {
        id: id.clone(),
        app: req.spec_name.clone(),
        world,
        version: 0,
        last_ground: None,
        learner: None,
        last_used: Instant::now(),
    });
    reply(json!({ "session_id": id, "app_name": req.spec_name, "version": 0 }))
}

fn session(app: &AppState, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    app.session(id).ok_or_else(|| ApiError::UnknownSession(id.to_string()))
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct GroundOptions {
    matcher: Option<MatcherKind>,
    rephrase: Option<bool>,
    utilities: Option<bool>,
    threshold: Option<f64>,
    require_word_overlap: Option<bool>,
}

impl GroundOptions {
    fn resolve(&self) -> GroundingOptions {
        let d = GroundingOptions::default();
        GroundingOptions {
            matcher: self.matcher.unwrap_or(d.matcher),
            rephrase: self.rephrase.unwrap_or(d.rephrase),
            utilities: self.utilities.unwrap_or(d.utilities),
            threshold: self.threshold.unwrap_or(d.threshold),
            require_word_overlap: self.require_word_overlap.unwrap_or(d.require_word_overlap),
        }
    }
}

#[derive(Deserialize)]
struct GroundRequest {
    command: String,
    #[serde(default)]
    execute: bool,
    #[serde(flatten)]
    options: GroundOptions,
}

async fn ground_command(State(app): Shared, Path(id): Path<String>, Json(req): Json<GroundRequest>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let engine = app.stores[&s.app].engine();
    let result = ground(&engine, &req.command, &req.options.resolve(), &s.world)?;
    let mut executed = false;
    let mut execution_error = None;
    if req.execute {
        if let Some(call) = &result.action {
            match s.world.execute_action(&call.api, &call.values()) {
                Ok(()) => {
                    executed = true;
                    s.version += 1;
                }
                Err(e) => execution_error = Some(e.to_string()),
            }
        }
    }
    s.last_ground = Some(result.clone());
    let mut body = json!({
        "result": result,
        "executed": executed,
        "execution_error": execution_error,
        "version": s.version,
    });
    if executed {
        body["state"] = json!(s.world);
    }
    reply(body)
}

async fn get_state(State(app): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = session(&app, &id)?;
    let s = handle.lock();
    reply(json!({ "session_id": s.id, "app_name": s.app, "version": s.version, "world": s.world }))
}

fn learner_reply(learner: &LearnerSession) -> ApiResult {
    reply(json!({ "learner": learner }))
}

fn active_learner(s: &mut Session) -> Result<&mut LearnerSession, ApiError> {
    s.learner.as_mut().ok_or(ApiError::NoLearnerSession)
}

async fn learner_state(State(app): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    learner_reply(active_learner(&mut s)?)
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct StartRequest {
    /// Command to verify; defaults to the session's last grounded command.
    command: Option<String>,
    #[serde(flatten)]
    options: GroundOptions,
    max_attempts: Option<usize>,
}

async fn learner_start(State(app): Shared, Path(id): Path<String>, Json(req): Json<StartRequest>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let result: GroundingResult = match (&req.command, &s.last_ground) {
        (Some(command), _) => ground(&app.stores[&s.app].engine(), command, &req.options.resolve(), &s.world)?,
        (None, Some(last)) => last.clone(),
        (None, None) => return Err(ApiError::BadRequest("no command given and nothing grounded yet".into())),
    };
    let mut learner = start_session(uuid::Uuid::new_v4().to_string(), &result.command.clone(), result);
    if let Some(m) = req.max_attempts {
        if m == 0 {
            return Err(ApiError::BadRequest("max_attempts must be at least 1".into()));
        }
        learner.max_attempts = m;
    }
    let learner = s.learner.insert(learner);
    learner_reply(learner)
}

#[derive(Deserialize)]
struct VerifyRequest {
    answer: Answer,
    #[serde(flatten)]
    options: GroundOptions,
}

async fn learner_verify(State(app): Shared, Path(id): Path<String>, Json(req): Json<VerifyRequest>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let engine = app.stores[&s.app].engine();
    let learner = active_learner(&mut s)?;
    learner.answer_verification(req.answer, &engine, &req.options.resolve())?;
    learner_reply(learner)
}

async fn learner_options(State(app): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let learner = active_learner(&mut s)?;
    reply(json!({ "state": learner.state, "attempt": learner.attempt, "options": learner.options }))
}

#[derive(Deserialize)]
struct ChooseRequest {
    /// Option position in the list.
    index: Option<usize>,
    /// Alternatively, the action AID of an option.
    aid: Option<Aid>,
    #[serde(default)]
    reject: bool,
    rephrased: Option<String>,
    #[serde(flatten)]
    options: GroundOptions,
}

async fn learner_choose(State(app): Shared, Path(id): Path<String>, Json(req): Json<ChooseRequest>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let engine = app.stores[&s.app].engine();
    let s = &mut *s;
    let learner = s.learner.as_mut().ok_or(ApiError::NoLearnerSession)?;
    let choice = match (req.index, req.aid, req.reject) {
        (Some(i), None, false) => Choice::Index(i),
        (None, Some(aid), false) => Choice::Index(
            nlground::learner::option_index(&learner.options, aid)
                .ok_or_else(|| ApiError::BadRequest(format!("no option for AID {aid}")))?,
        ),
        (None, None, true) => Choice::Reject { rephrased: req.rephrased },
        _ => return Err(ApiError::BadRequest("give exactly one of index, aid or reject".into())),
    };
    learner.choose_option(choice, &engine, &req.options.resolve(), &s.world)?;
    learner_reply(learner)
}

#[derive(Deserialize)]
struct ConfirmRequest {
    confirmed: bool,
}

async fn learner_confirm(State(app): Shared, Path(id): Path<String>, Json(req): Json<ConfirmRequest>) -> ApiResult {
    let handle = session(&app, &id)?;
    let mut s = handle.lock();
    let store = app.stores[&s.app].clone();
    let learner = active_learner(&mut s)?;
    learner.confirm_arguments(req.confirmed, &store)?;
    learner_reply(learner)
}
