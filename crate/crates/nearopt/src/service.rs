//! HTTP/JSON exploration service.
//!
//! Sessions hold an ordered constraint list over one dataset. Read-only engine calls are cached
//! per session under the canonical JSON of (constraints, endpoint, body); a cached reply carries
//! `x-cache: hit` and an identical body.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use nearopt_core::explore::{
    budget_interpolate, explore, hull_summary, pareto_frontier, EngineError, ExploreStatus, InfeasibilityReport,
    LinearConstraintSpec, ObjectiveSpec,
};
use nearopt_core::expr::ParseError;
use nearopt_core::lp::Sense;
use nearopt_core::model::{batch_interpolate, interpolate, BudgetPolicy, ModelError, VertexMatrix, WeightVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{self, IoError, Metadata};

/// Structured error body: `{"error": {"code", "message", "detail"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), detail: json!({}) }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} `{id}`"))
            .with_detail(json!({ "kind": what, "id": id }))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn parse(input: &str, e: &ParseError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string())
            .with_detail(json!({ "input": input, "position": e.position, "caret": e.caret(input) }))
    }

    fn infeasible(report: &InfeasibilityReport) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "infeasible",
            format!("constraints exclude the whole hull; `{}` is violated by {}", report.label, report.violation),
        )
        .with_detail(json!({ "label": report.label, "violation": report.violation }))
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::Infeasible(r) => Self::infeasible(r),
            EngineError::UnknownDimension(name) => Self::new(StatusCode::BAD_REQUEST, "unknown_dimension", e.to_string())
                .with_detail(json!({ "name": name })),
            EngineError::Model(m) => ApiError::from(m.clone()),
            EngineError::Solver(_) | EngineError::Lp(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "solver_error", e.to_string())
            }
            _ => Self::bad_request(e.to_string()),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", e.to_string())
    }
}

impl From<IoError> for ApiError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Model(m) => m.into(),
            other => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_dataset", other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message, "detail": self.detail } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone)]
struct StoredConstraint {
    text: String,
    spec: LinearConstraintSpec,
}

#[derive(Debug)]
struct Session {
    id: String,
    dataset: String,
    vm: Arc<VertexMatrix>,
    constraints: Vec<StoredConstraint>,
    created_at: u64,
    touched_at: u64,
    cache: HashMap<String, Value>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Session {
    fn specs(&self) -> Vec<LinearConstraintSpec> {
        self.constraints.iter().map(|c| c.spec.clone()).collect()
    }

    fn texts(&self) -> Vec<&str> {
        self.constraints.iter().map(|c| c.text.as_str()).collect()
    }

    fn cache_key(&self, endpoint: &str, body: &Value) -> String {
        // serde_json maps are key-sorted, so this serialization is canonical.
        json!({ "constraints": self.texts(), "endpoint": endpoint, "body": body }).to_string()
    }

    fn push(&mut self, text: &str) -> ApiResult<()> {
        let spec = LinearConstraintSpec::parse(text).map_err(|e| ApiError::parse(text, &e))?;
        spec.resolve(&self.vm)?;
        self.constraints.push(StoredConstraint { text: text.trim().to_string(), spec });
        Ok(())
    }
}

#[derive(Default)]
struct Inner {
    datasets: RwLock<BTreeMap<String, Arc<VertexMatrix>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    next_dataset: AtomicU64,
}

/// Shared service state; cheap to clone.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionSnapshot {
    id: String,
    dataset: String,
    constraints: Vec<String>,
    created_at: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    next_session: u64,
    sessions: Vec<SessionSnapshot>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_dataset(&self, id: impl Into<String>, vm: VertexMatrix) {
        self.inner.datasets.write().unwrap().insert(id.into(), Arc::new(vm));
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        self.inner.datasets.read().unwrap().keys().cloned().collect()
    }

    fn dataset(&self, id: &str) -> ApiResult<Arc<VertexMatrix>> {
        self.inner.datasets.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("dataset", id))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.inner.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    fn create_session(&self, dataset: &str) -> ApiResult<Arc<Mutex<Session>>> {
        let vm = self.dataset(dataset)?;
        let n = self.inner.next_session.fetch_add(1, Ordering::SeqCst) + 1;
        let t = now();
        let session = Session {
            id: format!("s{n}"),
            dataset: dataset.to_string(),
            vm,
            constraints: Vec::new(),
            created_at: t,
            touched_at: t,
            cache: HashMap::new(),
        };
        let id = session.id.clone();
        let handle = Arc::new(Mutex::new(session));
        self.inner.sessions.write().unwrap().insert(id, handle.clone());
        Ok(handle)
    }

    /// Write every session's dataset and constraint texts to `path`.
    pub fn write_snapshot(&self, path: &Path) -> Result<(), IoError> {
        let sessions = self.inner.sessions.read().unwrap();
        let mut list: Vec<SessionSnapshot> = sessions
            .values()
            .map(|s| {
                let s = s.lock().unwrap();
                SessionSnapshot {
                    id: s.id.clone(),
                    dataset: s.dataset.clone(),
                    constraints: s.texts().into_iter().map(String::from).collect(),
                    created_at: s.created_at,
                }
            })
            .collect();
        list.sort_by(|a, b| a.id.cmp(&b.id));
        let snap = Snapshot { next_session: self.inner.next_session.load(Ordering::SeqCst), sessions: list };
        std::fs::write(path, serde_json::to_vec_pretty(&snap)?)
            .map_err(|source| IoError::File { path: path.into(), source })
    }

    /// Restore sessions written by [`AppState::write_snapshot`]. Sessions whose dataset or
    /// constraints no longer resolve are skipped with a warning.
    pub fn restore_snapshot(&self, path: &Path) -> Result<usize, IoError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })?;
        let snap: Snapshot = serde_json::from_str(&text)?;
        let mut restored = 0;
        for s in snap.sessions {
            let Ok(vm) = self.dataset(&s.dataset) else {
                log::warn!("snapshot session {} refers to missing dataset {}", s.id, s.dataset);
                continue;
            };
            let mut session = Session {
                id: s.id.clone(),
                dataset: s.dataset,
                vm,
                constraints: Vec::new(),
                created_at: s.created_at,
                touched_at: now(),
                cache: HashMap::new(),
            };
            if s.constraints.iter().try_for_each(|c| session.push(c)).is_err() {
                log::warn!("snapshot session {} has constraints that no longer resolve", s.id);
                continue;
            }
            self.inner.sessions.write().unwrap().insert(s.id, Arc::new(Mutex::new(session)));
            restored += 1;
        }
        self.inner.next_session.fetch_max(snap.next_session, Ordering::SeqCst);
        Ok(restored)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", get(list_datasets).post(upload_dataset))
        .route("/datasets/{id}/dimensions", get(dataset_dimensions))
        .route("/datasets/{id}/vertices", get(dataset_vertices))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/constraints", post(add_constraint))
        .route("/sessions/{id}/constraints/{idx}", delete(remove_constraint))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/explore", post(run_explore))
        .route("/sessions/{id}/pareto", post(run_pareto))
        .route("/sessions/{id}/budget", post(run_budget))
        .route("/sessions/{id}/interpolate", post(run_interpolate))
        .route("/sessions/{id}/export", post(export_point))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let sessions = state.inner.sessions.read().unwrap().len();
    Json(json!({ "status": "ok", "datasets": state.dataset_ids().len(), "sessions": sessions }))
}

#[derive(Deserialize)]
struct UploadDataset {
    id: Option<String>,
    iterates_csv: String,
    metadata: Metadata,
    #[serde(default)]
    budget_policy: BudgetPolicy,
}

async fn upload_dataset(
    State(state): State<AppState>,
    body: Result<Json<UploadDataset>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(req) = body?;
    let (vm, warnings) = io::parse_vertex_matrix(req.iterates_csv.as_bytes(), req.metadata, req.budget_policy)?;
    let id = match req.id {
        Some(id) if id.is_empty() => return Err(ApiError::bad_request("dataset id must not be empty")),
        Some(id) => id,
        None => format!("d{}", state.inner.next_dataset.fetch_add(1, Ordering::SeqCst) + 1),
    };
    if state.dataset(&id).is_ok() {
        return Err(ApiError::new(StatusCode::CONFLICT, "conflict", format!("dataset `{id}` already exists")));
    }
    let (m, n) = (vm.m(), vm.n());
    state.add_dataset(id.clone(), vm);
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "m": m, "n": n, "warnings": warnings }))))
}

async fn list_datasets(State(state): State<AppState>) -> Json<Value> {
    let datasets = state.inner.datasets.read().unwrap();
    let list: Vec<Value> =
        datasets.iter().map(|(id, vm)| json!({ "id": id, "m": vm.m(), "n": vm.n() })).collect();
    Json(json!({ "datasets": list }))
}

fn catalog(id: &str, vm: &VertexMatrix) -> Value {
    let ranges: Vec<Value> = vm.column_ranges().iter().map(|(lo, hi)| json!({ "min": lo, "max": hi })).collect();
    json!({
        "id": id,
        "m": vm.m(),
        "n": vm.n(),
        "dimensions": vm.dims(),
        "ranges": ranges,
        "least_cost_id": vm.least_cost_id(),
        "budget_slack": vm.budget_slack(),
        "cost_dimension": vm.cost_dimension().map(|d| vm.dims()[d].name.clone()),
    })
}

async fn dataset_dimensions(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let vm = state.dataset(&id)?;
    Ok(Json(catalog(&id, &vm)))
}

async fn dataset_vertices(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let vm = state.dataset(&id)?;
    let rows: Vec<&[f64]> = (0..vm.m()).map(|i| vm.row(i)).collect();
    Ok(Json(json!({
        "dimensions": vm.dims().iter().map(|d| &d.name).collect::<Vec<_>>(),
        "vertex_ids": vm.vertex_ids(),
        "least_cost_id": vm.least_cost_id(),
        "rows": rows,
    })))
}

#[derive(Deserialize)]
struct CreateSession {
    dataset: String,
}

fn session_view(s: &Session) -> Value {
    let constraints: Vec<Value> = s
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| json!({ "index": i, "text": c.text }))
        .collect();
    json!({
        "id": s.id,
        "dataset": s.dataset,
        "constraints": constraints,
        "created_at": s.created_at,
        "touched_at": s.touched_at,
    })
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(req) = body?;
    let handle = state.create_session(&req.dataset)?;
    let s = handle.lock().unwrap();
    let mut view = session_view(&s);
    view["catalog"] = catalog(&s.dataset, &s.vm);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let handle = state.session(&id)?;
    let s = handle.lock().unwrap();
    Ok(Json(session_view(&s)))
}

/// Constraint list, feasibility flag and per-dimension range over the constrained hull.
fn summary_payload(s: &Session) -> ApiResult<Value> {
    let specs = s.specs();
    let view = session_view(s);
    let (feasible, infeasibility, ranges) = match hull_summary(&s.vm, &specs) {
        Ok(r) => (true, None, Some(r)),
        Err(EngineError::Infeasible(report)) => (false, Some(report), None),
        Err(e) => return Err(e.into()),
    };
    let summary = ranges.map(|r| {
        s.vm.dims()
            .iter()
            .zip(r)
            .map(|(d, (lo, hi))| json!({ "name": d.name, "min": lo, "max": hi }))
            .collect::<Vec<_>>()
    });
    Ok(json!({
        "constraints": view["constraints"],
        "feasible": feasible,
        "infeasibility": infeasibility,
        "summary": summary,
    }))
}

#[derive(Deserialize)]
struct AddConstraint {
    constraint: String,
}

async fn add_constraint(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<AddConstraint>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let handle = state.session(&id)?;
    let mut s = handle.lock().unwrap();
    s.push(&req.constraint)?;
    s.touched_at = now();
    Ok(Json(summary_payload(&s)?))
}

async fn remove_constraint(
    State(state): State<AppState>,
    UrlPath((id, idx)): UrlPath<(String, usize)>,
) -> ApiResult<Json<Value>> {
    let handle = state.session(&id)?;
    let mut s = handle.lock().unwrap();
    if idx >= s.constraints.len() {
        return Err(ApiError::not_found("constraint", &idx.to_string()));
    }
    s.constraints.remove(idx);
    s.touched_at = now();
    Ok(Json(summary_payload(&s)?))
}

/// Serve `endpoint` from the session cache, computing and storing it on a miss.
fn cached(
    state: &AppState,
    id: &str,
    endpoint: &str,
    body: &Value,
    compute: impl FnOnce(&Session) -> ApiResult<Value>,
) -> ApiResult<Response> {
    let handle = state.session(id)?;
    let mut s = handle.lock().unwrap();
    s.touched_at = now();
    let key = s.cache_key(endpoint, body);
    let (value, hit) = match s.cache.get(&key) {
        Some(v) => (v.clone(), true),
        None => {
            let v = compute(&s)?;
            s.cache.insert(key, v.clone());
            (v, false)
        }
    };
    let mut resp = Json(value).into_response();
    resp.headers_mut().insert("x-cache", HeaderValue::from_static(if hit { "hit" } else { "miss" }));
    Ok(resp)
}

async fn summary(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    cached(&state, &id, "summary", &Value::Null, summary_payload)
}

fn objective(text: &str, sense: Option<Sense>) -> ApiResult<ObjectiveSpec> {
    ObjectiveSpec::parse(text, sense.unwrap_or(Sense::Min)).map_err(|e| ApiError::parse(text, &e))
}

#[derive(Serialize, Deserialize)]
struct ExploreRequest {
    objective: String,
    #[serde(default)]
    sense: Option<Sense>,
}

async fn run_explore(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(raw) = body?;
    let req: ExploreRequest = serde_json::from_value(raw.clone()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    cached(&state, &id, "explore", &raw, |s| {
        let obj = objective(&req.objective, req.sense)?;
        let r = explore(&s.vm, &obj, &s.specs())?;
        if r.status == ExploreStatus::Infeasible {
            let report = r.infeasibility.expect("infeasible results carry a report");
            return Err(ApiError::infeasible(&report));
        }
        Ok(serde_json::to_value(&r).expect("results serialize"))
    })
}

#[derive(Deserialize)]
struct ParetoRequest {
    objective: String,
    #[serde(default)]
    sense: Option<Sense>,
    traced: String,
    #[serde(default = "default_steps")]
    steps: usize,
}

fn default_steps() -> usize {
    11
}

async fn run_pareto(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(raw) = body?;
    let req: ParetoRequest = serde_json::from_value(raw.clone()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    cached(&state, &id, "pareto", &raw, |s| {
        let obj = objective(&req.objective, req.sense)?;
        let start = Instant::now();
        let f = pareto_frontier(&s.vm, &obj, &req.traced, req.steps, &s.specs())?;
        let mut v = serde_json::to_value(&f).expect("frontier serializes");
        v["solve_millis"] = json!(start.elapsed().as_secs_f64() * 1e3);
        Ok(v)
    })
}

#[derive(Deserialize)]
struct BudgetRequest {
    slack: f64,
}

async fn run_budget(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(raw) = body?;
    let req: BudgetRequest = serde_json::from_value(raw.clone()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    cached(&state, &id, "budget", &raw, |s| {
        let points = budget_interpolate(&s.vm, req.slack)?;
        let lc = s.vm.least_cost_index();
        let sources: Vec<&String> =
            s.vm.vertex_ids().iter().enumerate().filter(|(i, _)| *i != lc).map(|(_, id)| id).collect();
        Ok(json!({
            "slack": req.slack,
            "share": req.slack / s.vm.budget_slack(),
            "source_ids": sources,
            "points": points,
        }))
    })
}

#[derive(Deserialize)]
struct InterpolateRequest {
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    support: Option<Vec<usize>>,
}

async fn run_interpolate(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(raw) = body?;
    let req: InterpolateRequest =
        serde_json::from_value(raw.clone()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    cached(&state, &id, "interpolate", &raw, |s| {
        let points = match req.weights {
            Some(w) => vec![interpolate(&s.vm, &WeightVector::new(w)?)?],
            None => {
                let support = req.support.clone().unwrap_or_else(|| (0..s.vm.m()).collect());
                batch_interpolate(&s.vm, req.count.unwrap_or(1), req.seed.unwrap_or(0), &support)?
            }
        };
        Ok(json!({ "points": points }))
    })
}

#[derive(Deserialize)]
struct ExportRequest {
    weights: Vec<f64>,
}

async fn export_point(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ExportRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let handle = state.session(&id)?;
    let vm = handle.lock().unwrap().vm.clone();
    let point = interpolate(&vm, &WeightVector::new(req.weights)?)?;
    let mut buf = Vec::new();
    io::write_capacities(&io::capacities_of(&vm, &point)?, &mut buf)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], buf).into_response())
}

/// Every dataset under `dir`: the directory itself if it holds an iterate file (id = its
/// name), plus each subdirectory that does (id = subdirectory name).
pub fn load_data_dir(dir: &Path, policy: BudgetPolicy) -> Result<Vec<(String, VertexMatrix)>, IoError> {
    if !dir.is_dir() {
        return Err(IoError::Format(format!("data directory `{}` does not exist", dir.display())));
    }
    let name = |p: &Path| p.file_name().map_or_else(|| "data".to_string(), |n| n.to_string_lossy().into_owned());
    let mut out = Vec::new();
    if dir.join(io::ITERATES_FILE).is_file() {
        out.push((name(dir), io::load_dataset_dir(dir, policy)?.0));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(io::ITERATES_FILE).is_file())
        .collect();
    subdirs.sort();
    for p in subdirs {
        out.push((name(&p), io::load_dataset_dir(&p, policy)?.0));
    }
    Ok(out)
}

/// Serve until `shutdown` resolves, then write the snapshot if one is configured.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    snapshot: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(state.clone())).with_graceful_shutdown(shutdown).await?;
    if let Some(path) = snapshot {
        match state.write_snapshot(&path) {
            Ok(()) => log::info!("wrote session snapshot to {}", path.display()),
            Err(e) => log::error!("could not write snapshot: {e}"),
        }
    }
    Ok(())
}
