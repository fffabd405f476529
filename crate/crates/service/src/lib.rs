//! HTTP session API over the relaxation pipeline.
//!
//! A session holds one derived net, its edit history and optionally an
//! uploaded event log. Payloads use the same JSON/CSV/SQL text formats as
//! the command-line tool, so a session can be reproduced offline from its
//! script.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/sessions` | PNML, or `{"pnml": .., "script": [..]}` | `{id, matrix}` |
//! | GET | `/sessions/{id}/matrix` | | matrix file |
//! | POST | `/sessions/{id}/ops` | one op record | `{matrix, diff}` |
//! | POST | `/sessions/{id}/undo` | | `{matrix, diff}` |
//! | GET | `/sessions/{id}/script` | | script file |
//! | GET | `/sessions/{id}/constraints` | | constraint file |
//! | GET | `/sessions/{id}/sql?mode=paper\|violation` | | SQL script |
//! | POST | `/sessions/{id}/log` | CSV log | `{cases, events}` |
//! | POST | `/sessions/{id}/check` | optional CSV log | conformance report |
//! | GET | `/sessions/{id}/snapshot` | | `{pnml, script}` |
//!
//! Errors are `{code, message, detail}` with status 400 (malformed input),
//! 404 (unknown session), 409 (operation precondition, empty history,
//! missing log) or 422 (net not free-choice, unsound, state space too large).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use relaxq::checker::LogError;
use relaxq::constraints::ConstraintError;
use relaxq::net::{NetError, DEFAULT_STATE_LIMIT};
use relaxq::pipeline::{derive, DeriveError};
use relaxq::relaxation::{RelaxError, ReplayError};
use relaxq::sqlgen::SqlConfig;
use relaxq::{
    check_log, constraints_from_matrix, parse_event_log, parse_pnml, render_bundle, EditHistory,
    MatrixDiff, QueryMode, RelationMatrix, RelaxationOp, RelaxationScript, Trace,
};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message, "detail": self.detail});
        (self.status, Json(body)).into_response()
    }
}

impl From<NetError> for ApiError {
    fn from(e: NetError) -> Self {
        let detail = match &e {
            NetError::MalformedDocument { line, .. } => json!({ "line": line }),
            NetError::NotAWorkflowNet { violation, node } => {
                json!({ "violation": format!("{violation:?}"), "node": node })
            }
            NetError::DuplicateLabel {
                label,
                first,
                second,
            } => {
                json!({ "label": label, "transitions": [first, second] })
            }
        };
        ApiError::bad_request("invalid_net", e.to_string()).with_detail(detail)
    }
}

impl From<DeriveError> for ApiError {
    fn from(e: DeriveError) -> Self {
        let unprocessable =
            |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string());
        match &e {
            DeriveError::Net(inner) => inner.clone().into(),
            DeriveError::NotFreeChoice {
                place,
                first,
                second,
            } => unprocessable("not_free_choice")
                .with_detail(json!({ "place": place, "transitions": [first, second] })),
            DeriveError::StateSpaceExceeded(s) => {
                unprocessable("state_space_exceeded").with_detail(json!({ "limit": s.limit }))
            }
            DeriveError::Unsound { description, .. } => {
                unprocessable("unsound").with_detail(json!({ "counterexample": description }))
            }
        }
    }
}

impl From<RelaxError> for ApiError {
    fn from(e: RelaxError) -> Self {
        match &e {
            RelaxError::UnknownActivity(a) => {
                ApiError::bad_request("unknown_activity", e.to_string())
                    .with_detail(json!({ "activity": a }))
            }
            RelaxError::PreconditionViolated { op, cell, .. } => {
                ApiError::new(StatusCode::CONFLICT, "precondition_violated", e.to_string())
                    .with_detail(json!({
                        "op": op,
                        "cell": cell,
                    }))
            }
            RelaxError::EmptyHistory => {
                ApiError::new(StatusCode::CONFLICT, "empty_history", e.to_string())
            }
        }
    }
}

impl From<ReplayError> for ApiError {
    fn from(e: ReplayError) -> Self {
        let inner: ApiError = e.error.clone().into();
        ApiError {
            message: e.to_string(),
            detail: json!({ "index": e.index, "cause": inner.detail }),
            ..inner
        }
    }
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        ApiError::bad_request("invalid_log", e.to_string())
    }
}

impl From<ConstraintError> for ApiError {
    fn from(e: ConstraintError) -> Self {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no_constraints",
            e.to_string(),
        )
    }
}

struct Session {
    pnml: String,
    history: EditHistory,
    log: Option<Vec<Trace>>,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<RwLock<Session>>>>>,
    state_limit: usize,
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(DEFAULT_STATE_LIMIT)
    }
}

impl AppState {
    pub fn new(state_limit: usize) -> Self {
        AppState {
            sessions: Arc::default(),
            state_limit,
        }
    }

    fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "unknown_session",
                    format!("no session `{id}`"),
                )
            })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/matrix", get(get_matrix))
        .route("/sessions/{id}/ops", post(post_op))
        .route("/sessions/{id}/undo", post(post_undo))
        .route("/sessions/{id}/script", get(get_script))
        .route("/sessions/{id}/constraints", get(get_constraints))
        .route("/sessions/{id}/sql", get(get_sql))
        .route("/sessions/{id}/log", post(post_log))
        .route("/sessions/{id}/check", post(post_check))
        .route("/sessions/{id}/snapshot", get(get_snapshot))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state_limit: usize) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(state_limit))).await
}

fn json_file(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn matrix_value(m: &RelationMatrix) -> Value {
    serde_json::from_str(&m.to_json()).expect("matrix file is JSON")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    pnml: String,
    #[serde(default)]
    script: Option<Value>,
}

#[derive(Deserialize)]
struct CreateParams {
    state_limit: Option<usize>,
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

async fn create_session(
    State(state): State<AppState>,
    Query(params): Query<CreateParams>,
    body: String,
) -> Result<Response, ApiError> {
    let (pnml, script) = if body.trim_start().starts_with('{') {
        let snapshot: Snapshot = serde_json::from_str(&body)
            .map_err(|e| ApiError::bad_request("invalid_snapshot", e.to_string()))?;
        let script = match snapshot.script {
            Some(v) => RelaxationScript::from_json(&v.to_string())
                .map_err(|e| ApiError::bad_request("invalid_script", e.to_string()))?,
            None => RelaxationScript::default(),
        };
        (snapshot.pnml, script)
    } else {
        (body, RelaxationScript::default())
    };

    let net = parse_pnml(&pnml)?;
    let limit = params.state_limit.unwrap_or(state.state_limit);
    let derivation = derive(net, limit)?;
    let mut history = EditHistory::new(derivation.matrix);
    for (index, op) in script.ops.into_iter().enumerate() {
        history
            .apply(op)
            .map_err(|error| ApiError::from(ReplayError { index, error }))?;
    }
    let id = new_session_id();
    let body = json!({ "id": id, "matrix": matrix_value(history.current()) });
    let session = Session {
        pnml,
        history,
        log: None,
    };
    state
        .sessions
        .write()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_matrix(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let text = session
        .read()
        .expect("session lock")
        .history
        .current()
        .to_json();
    Ok(json_file(text))
}

async fn post_op(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let op: RelaxationOp = serde_json::from_str(&body)
        .map_err(|e| ApiError::bad_request("invalid_op", e.to_string()))?;
    let session = state.session(&id)?;
    let mut s = session.write().expect("session lock");
    let diff = s.history.apply(op)?.clone();
    Ok(Json(
        json!({ "matrix": matrix_value(s.history.current()), "diff": diff }),
    ))
}

async fn post_undo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.write().expect("session lock");
    let before = s.history.current().clone();
    let after = s.history.undo()?.clone();
    let diff = MatrixDiff::between(&before, &after);
    Ok(Json(
        json!({ "matrix": matrix_value(&after), "diff": diff }),
    ))
}

async fn get_script(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let text = session
        .read()
        .expect("session lock")
        .history
        .script()
        .to_json();
    Ok(json_file(text))
}

async fn get_constraints(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let cs = constraints_from_matrix(session.read().expect("session lock").history.current())?;
    Ok(json_file(cs.to_json()))
}

#[derive(Deserialize)]
struct SqlParams {
    mode: Option<String>,
    schema: Option<String>,
}

async fn get_sql(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<SqlParams>,
) -> Result<Response, ApiError> {
    let mode: QueryMode = match params.mode.as_deref() {
        None => QueryMode::Paper,
        Some(m) => m.parse().map_err(|_| {
            ApiError::bad_request(
                "invalid_mode",
                format!("unknown mode `{m}`, expected paper or violation"),
            )
        })?,
    };
    let session = state.session(&id)?;
    let cs = constraints_from_matrix(session.read().expect("session lock").history.current())?;
    let config = SqlConfig {
        schema: params.schema,
    };
    let script = render_bundle(&cs, mode, &config).script();
    Ok((
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        script,
    )
        .into_response())
}

async fn post_log(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let traces = parse_event_log(&body)?;
    let events: usize = traces.iter().map(Trace::len).sum();
    let cases = traces.len();
    session.write().expect("session lock").log = Some(traces);
    Ok(Json(json!({ "cases": cases, "events": events })))
}

async fn post_check(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let uploaded = if body.trim().is_empty() {
        None
    } else {
        Some(parse_event_log(&body)?)
    };
    let s = session.read().expect("session lock");
    let traces = uploaded.as_ref().or(s.log.as_ref()).ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "no_log",
            "no event log uploaded for this session",
        )
    })?;
    let cs = constraints_from_matrix(s.history.current())?;
    let report =
        check_log(traces, &cs).map_err(|e| ApiError::bad_request("invalid_log", e.to_string()))?;
    Ok(json_file(report.to_json()))
}

async fn get_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let s = session.read().expect("session lock");
    let script: Value =
        serde_json::from_str(&s.history.script().to_json()).expect("script is JSON");
    Ok(Json(json!({ "pnml": s.pnml, "script": script })))
}
