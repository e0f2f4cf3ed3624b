//! HTTP+JSON API over an in-memory registry of sessions.
//!
//! Sessions are independent; requests touching one session are serialized by
//! its lock. An ask that takes longer than `ask_wait` answers 202 with a job
//! ID, and `GET /jobs/{job}` then answers like the ask would have.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use planlens_core::session::{Annotation, MetricDef, PlanId, PlanNode, Session};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::task::JoinHandle;

use crate::error::ApiError;
use crate::ops::{self, AskRequest, NewSession, ValidateRequest};

pub const DEFAULT_ASK_WAIT: Duration = Duration::from_secs(1);

type Shared = Arc<tokio::sync::Mutex<Session>>;

enum Job {
    Running,
    Done(Box<ApiResult<PlanNode>>),
}

pub struct AppState {
    sessions: Mutex<HashMap<u64, Shared>>,
    jobs: Mutex<HashMap<u64, Job>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
    ask_wait: Duration,
}

impl AppState {
    pub fn new(ask_wait: Duration) -> Arc<Self> {
        Arc::new(AppState {
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
            ask_wait,
        })
    }

    fn session(&self, id: u64) -> Result<Shared, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown-session", format!("no session with ID {id}")))
    }

    fn register(&self, session: Session) -> u64 {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed);
        self.sessions.lock().unwrap().insert(id, Arc::new(tokio::sync::Mutex::new(session)));
        id
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// JSON body whose rejection is an `ApiError`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/load", post(load))
        .route("/sessions/{id}", get(overview))
        .route("/sessions/{id}/workspace", get(workspace))
        .route("/sessions/{id}/save", post(save))
        .route("/sessions/{id}/current", put(set_current))
        .route("/sessions/{id}/plans", get(plans))
        .route("/sessions/{id}/plans/{pid}", get(plan))
        .route("/sessions/{id}/plans/{pid}/steps/{k}/alternatives", get(alternatives))
        .route("/sessions/{id}/ask", post(ask))
        .route("/sessions/{id}/metrics", get(metrics).post(add_metric))
        .route("/sessions/{id}/compare", get(compare))
        .route("/sessions/{id}/annotations", get(annotations).post(annotate))
        .route("/jobs/{job}", get(job))
        .route("/validate", post(validate))
        .with_state(state)
}

/// Runs CPU- or process-bound work off the async threads.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    flatten(tokio::task::spawn_blocking(f).await)
}

fn flatten<T>(joined: Result<ApiResult<T>, tokio::task::JoinError>) -> ApiResult<T> {
    joined.unwrap_or_else(|e| Err(ApiError::new(500, "internal", e.to_string())))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    session_id: u64,
    root_plan: PlanNode,
}

async fn create(State(st): State<Arc<AppState>>, Body(req): Body<NewSession>) -> ApiResult<impl IntoResponse> {
    let session = blocking(move || ops::start(&req)).await?;
    let root_plan = ops::root(&session);
    let session_id = st.register(session);
    Ok((StatusCode::CREATED, Json(Created { session_id, root_plan })))
}

#[derive(Deserialize)]
struct LoadRequest {
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    workspace: Option<Value>,
}

async fn load(State(st): State<Arc<AppState>>, Body(req): Body<LoadRequest>) -> ApiResult<impl IntoResponse> {
    let bytes = match (req.path, req.workspace) {
        (Some(path), None) => tokio::fs::read(&path).await?,
        (None, Some(ws)) => serde_json::to_vec(&ws).expect("JSON value serializes"),
        _ => return Err(ApiError::bad_request("give exactly one of `path` and `workspace`")),
    };
    let session = blocking(move || Ok(Session::load(&bytes)?)).await?;
    let current = session.current();
    let session_id = st.register(session);
    Ok((StatusCode::CREATED, Json(json!({ "sessionId": session_id, "current": current }))))
}

async fn overview(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    let ws = s.workspace();
    Ok(Json(json!({
        "sessionId": id,
        "current": ws.current,
        "plans": ws.nodes,
        "metrics": ws.metrics,
        "config": ws.config,
    })))
}

async fn workspace(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(serde_json::to_value(s.workspace()).expect("workspace serializes")))
}

#[derive(Deserialize)]
struct SaveRequest {
    path: String,
}

async fn save(
    State(st): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Body(req): Body<SaveRequest>,
) -> ApiResult<Json<Value>> {
    let text = st.session(id)?.lock().await.save();
    tokio::fs::write(&req.path, text).await?;
    Ok(Json(json!({ "path": req.path })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CurrentRequest {
    plan_id: PlanId,
}

async fn set_current(
    State(st): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Body(req): Body<CurrentRequest>,
) -> ApiResult<Json<Value>> {
    let s = st.session(id)?;
    s.lock().await.set_current(req.plan_id)?;
    Ok(Json(json!({ "current": req.plan_id })))
}

async fn plans(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Vec<PlanNode>>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(s.workspace().nodes.clone()))
}

async fn plan(State(st): State<Arc<AppState>>, Path((id, pid)): Path<(u64, PlanId)>) -> ApiResult<Json<PlanNode>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(s.node(pid)?.clone()))
}

async fn alternatives(
    State(st): State<Arc<AppState>>,
    Path((id, pid, k)): Path<(u64, PlanId, usize)>,
) -> ApiResult<Json<Vec<String>>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(ops::alternatives(&s, pid, k)?))
}

fn asked(result: ApiResult<PlanNode>) -> Response {
    match result {
        Ok(node) => (StatusCode::CREATED, Json(node)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn ask(State(st): State<Arc<AppState>>, Path(id): Path<u64>, Body(req): Body<AskRequest>) -> ApiResult<Response> {
    let s = st.session(id)?;
    let mut handle: JoinHandle<ApiResult<PlanNode>> =
        tokio::task::spawn_blocking(move || ops::ask(&mut s.blocking_lock(), &req));
    if let Ok(joined) = tokio::time::timeout(st.ask_wait, &mut handle).await {
        return Ok(asked(flatten(joined)));
    }
    let job = st.next_job.fetch_add(1, Ordering::Relaxed);
    st.jobs.lock().unwrap().insert(job, Job::Running);
    let jobs = st.clone();
    tokio::spawn(async move {
        let result = flatten(handle.await);
        jobs.jobs.lock().unwrap().insert(job, Job::Done(Box::new(result)));
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "jobId": job, "poll": format!("/jobs/{job}") }))).into_response())
}

async fn job(State(st): State<Arc<AppState>>, Path(job): Path<u64>) -> ApiResult<Response> {
    let jobs = st.jobs.lock().unwrap();
    match jobs.get(&job) {
        None => Err(ApiError::not_found("unknown-job", format!("no job with ID {job}"))),
        Some(Job::Running) => {
            Ok((StatusCode::ACCEPTED, Json(json!({ "jobId": job, "status": "running" }))).into_response())
        }
        Some(Job::Done(result)) => Ok(asked((**result).clone())),
    }
}

async fn metrics(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Vec<MetricDef>>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(s.workspace().metrics.clone()))
}

async fn add_metric(
    State(st): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Body(def): Body<MetricDef>,
) -> ApiResult<impl IntoResponse> {
    let s = st.session(id)?;
    let mut s = s.lock().await;
    s.add_metric(def)?;
    Ok((StatusCode::CREATED, Json(s.workspace().metrics.clone())))
}

#[derive(Deserialize)]
struct CompareQuery {
    #[serde(default)]
    plans: String,
    #[serde(default)]
    metrics: String,
}

async fn compare(
    State(st): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<CompareQuery>,
) -> ApiResult<Json<planlens_core::session::Comparison>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(ops::compare(&s, &ops::id_list(&q.plans)?, &ops::name_list(&q.metrics))?))
}

async fn annotations(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Vec<Annotation>>> {
    let s = st.session(id)?;
    let s = s.lock().await;
    Ok(Json(s.workspace().annotations.clone()))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct AnnotateRequest {
    plan_id: PlanId,
    #[serde(default)]
    step: Option<usize>,
    text: String,
}

async fn annotate(
    State(st): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Body(req): Body<AnnotateRequest>,
) -> ApiResult<impl IntoResponse> {
    let s = st.session(id)?;
    let mut s = s.lock().await;
    s.annotate(req.plan_id, req.step, &req.text)?;
    Ok((StatusCode::CREATED, Json(s.workspace().annotations.clone())))
}

async fn validate(Body(req): Body<ValidateRequest>) -> ApiResult<Json<planlens_core::sim::ValidationReport>> {
    Ok(Json(blocking(move || ops::check_plan(&req)).await?))
}

/// Serves the API until the process is stopped.
pub async fn serve(addr: &str, ask_wait: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(ask_wait))).await
}
