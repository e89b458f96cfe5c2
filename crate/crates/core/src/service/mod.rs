//! HTTP API over a file-backed case store.

mod config;
mod store;

pub use config::{ConfigError, EndpointConfig, ProviderMode, ProvidersConfig, ServiceConfig, ENV_OVERRIDES};
pub use store::{write_atomic, CaseStore, StoreError, StoredResponse};

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::evaluation::{
    evaluate_cases, load_corpus_with, read_reviews, EvalError, EvalOutcome, ScoringConfig, Weights,
};
use crate::imaging::RasterImage;
use crate::orchestrator::{
    run_condition_followup, run_initial_analysis, run_lesion_path, Case, MockProvider,
    ProviderSet, WorkflowError, WorkflowState,
};
use crate::rules::{Lexicon, Path as WorkflowPath};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), details: None }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    fn body(&self) -> Value {
        let mut e = json!({ "code": self.code, "message": self.message });
        if let Some(d) = &self.details {
            e["details"] = d.clone();
        }
        json!({ "error": e })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(what) => Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found")),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", other.to_string()),
        }
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

fn workflow_error(e: WorkflowError, case: &Case) -> ApiError {
    let state = json!({ "state": case.state.name() });
    match e {
        WorkflowError::IllegalTransition { .. } => ApiError::new(StatusCode::CONFLICT, "illegal_transition", e.to_string()).with(state),
        WorkflowError::Provider(ref f) => {
            let retries = f.retries;
            ApiError::new(StatusCode::BAD_GATEWAY, "provider_failed", e.to_string())
                .with(json!({ "state": case.state.name(), "retries": retries }))
        }
        WorkflowError::Unstructured => ApiError::new(StatusCode::BAD_GATEWAY, "unstructured_response", e.to_string()).with(state),
        WorkflowError::NoLesion | WorkflowError::Image(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_lesion", e.to_string()).with(state)
        }
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "workflow", other.to_string()).with(state),
    }
}

type Reply = Result<(StatusCode, Value), ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunRequest {
    pub corpus: PathBuf,
    pub reviews: PathBuf,
    #[serde(default)]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub entity_template: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProgress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub id: String,
    pub status: EvalStatus,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub request: EvalRunRequest,
    pub progress: EvalProgress,
    pub outcome: Option<EvalOutcome>,
    pub error: Option<String>,
}

type LockMap = parking_lot::Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>;

pub struct AppState {
    pub config: ServiceConfig,
    pub store: CaseStore,
    pub providers: ProviderSet,
    lexicon: Option<Arc<Lexicon>>,
    case_locks: LockMap,
    key_locks: LockMap,
    runs: parking_lot::Mutex<HashMap<String, EvalRun>>,
}

fn lock_for(map: &LockMap, key: &str) -> Arc<tokio::sync::Mutex<()>> {
    map.lock().entry(key.to_string()).or_default().clone()
}

impl AppState {
    /// Opens the store and marks evaluation runs interrupted by a restart
    /// as failed.
    pub fn new(config: ServiceConfig, providers: ProviderSet) -> Result<Arc<Self>, ApiError> {
        let store = CaseStore::open(&config.data_dir)?;
        let lexicon = config
            .load_lexicon()
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "config", e.to_string()))?
            .map(Arc::new);
        for mut run in store.list_json::<EvalRun>("eval-runs")? {
            if run.status == EvalStatus::Running {
                run.status = EvalStatus::Failed;
                run.error = Some("interrupted by restart".into());
                store.save_json("eval-runs", &run.id, &run)?;
            }
        }
        Ok(Arc::new(Self {
            config,
            store,
            providers,
            lexicon,
            case_locks: Default::default(),
            key_locks: Default::default(),
            runs: Default::default(),
        }))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config.eval_root.join(p)
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_image_bytes / 3 * 4 + 64 * 1024;
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/cases", post(create_case))
        .route("/cases/{id}/analyze", post(analyze))
        .route("/cases/{id}/xai", post(xai))
        .route("/cases/{id}/followup", post(followup))
        .route("/cases/{id}/report", get(report))
        .route("/cases/{id}/image", get(image))
        .route("/cases/{id}/plots/{name}", get(plot))
        .route("/eval/runs", post(create_eval_run))
        .route("/eval/runs/{id}", get(get_eval_run))
        .layer(DefaultBodyLimit::max(limit))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

async fn require_token(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.config.auth_token {
        let ok = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

fn to_response(reply: Reply) -> (StatusCode, Value) {
    match reply {
        Ok(r) => r,
        Err(e) => (e.status, e.body()),
    }
}

/// Runs `f` once per `Idempotency-Key` and scope; repeats replay the stored
/// status and body.
async fn idempotent<Fut: Future<Output = Reply>>(
    state: &AppState,
    headers: &HeaderMap,
    scope: &str,
    f: impl FnOnce() -> Fut,
) -> Response {
    let Some(key) = headers.get("idempotency-key").and_then(|v| v.to_str().ok()) else {
        let (status, body) = to_response(f().await);
        return (status, Json(body)).into_response();
    };
    let digest = hex::encode(Sha256::digest(format!("{scope}\n{key}")));
    let lock = lock_for(&state.key_locks, &digest);
    let _guard = lock.lock().await;
    if let Ok(stored) = state.store.load_json::<StoredResponse>("idempotency", &digest) {
        let status = StatusCode::from_u16(stored.status).unwrap_or(StatusCode::OK);
        let mut response = (status, Json(stored.body)).into_response();
        response.headers_mut().insert("idempotent-replayed", HeaderValue::from_static("true"));
        return response;
    }
    let (status, body) = to_response(f().await);
    let record = StoredResponse { status: status.as_u16(), body: body.clone() };
    if let Err(e) = state.store.save_json("idempotency", &digest, &record) {
        tracing::warn!("idempotency record not saved: {e}");
    }
    (status, Json(body)).into_response()
}

#[derive(Deserialize)]
struct UploadJson {
    image: String,
}

async fn create_case(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let s = state.clone();
    let content_type = headers.get(header::CONTENT_TYPE).cloned();
    idempotent(&state, &headers, "POST /cases", || async move {
        let is_json = content_type
            .as_ref()
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("application/json"));
        let bytes = if is_json {
            let upload: UploadJson = serde_json::from_slice(&body)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
            base64::engine::general_purpose::STANDARD
                .decode(upload.image.trim())
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("image is not base64: {e}")))?
        } else {
            body.to_vec()
        };
        if bytes.len() > s.config.max_image_bytes {
            return Err(ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "too_large",
                format!("image is {} bytes; the limit is {}", bytes.len(), s.config.max_image_bytes),
            ));
        }
        if let Err(e) = RasterImage::decode(&bytes) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "undecodable_image", e.to_string()));
        }
        let case = Case::new(uuid::Uuid::new_v4().to_string(), bytes);
        let store = s.clone();
        let case = tokio::task::spawn_blocking(move || store.store.create(&case).map(|_| case)).await??;
        Ok((StatusCode::CREATED, json!({ "id": case.id, "state": case.state.name(), "image_sha256": case.image_sha256 })))
    })
    .await
}

#[derive(Clone, Copy)]
enum Step {
    Analyze,
    Xai,
    Followup,
}

async fn run_step(state: Arc<AppState>, id: String, step: Step) -> Reply {
    let lock = lock_for(&state.case_locks, &id);
    let _guard = lock.lock().await;
    let s = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut case = s.store.load(&id)?;
        let before = case.audit.len();
        let result = match step {
            Step::Analyze => run_initial_analysis(&mut case, &s.providers)
                .map(|(assessment, decision)| json!({ "assessment": assessment, "path": decision })),
            Step::Xai => run_lesion_path(&mut case, &s.providers, &s.config.grabcut).map(|o| {
                json!({
                    "features": o.features,
                    "technical_report": o.technical_report,
                    "xai_report": o.xai_report,
                    "send2lab": o.send2lab,
                })
            }),
            Step::Followup => run_condition_followup(&mut case, &s.providers).map(|a| json!({ "assessment": a })),
        };
        if case.audit.len() != before {
            s.store.save(&case)?;
        }
        match result {
            Ok(result) => Ok((StatusCode::OK, json!({ "id": case.id, "state": case.state.name(), "result": result }))),
            Err(e) => Err(workflow_error(e, &case)),
        }
    })
    .await?
}

async fn analyze(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Response {
    let scope = format!("POST /cases/{id}/analyze");
    idempotent(&state.clone(), &headers, &scope, || run_step(state, id, Step::Analyze)).await
}

async fn xai(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Response {
    let scope = format!("POST /cases/{id}/xai");
    idempotent(&state.clone(), &headers, &scope, || run_step(state, id, Step::Xai)).await
}

async fn followup(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Response {
    let scope = format!("POST /cases/{id}/followup");
    idempotent(&state.clone(), &headers, &scope, || run_step(state, id, Step::Followup)).await
}

fn allowed_actions(case: &Case) -> Vec<&'static str> {
    match (&case.state, case.artifacts.path.as_ref().map(|d| d.path)) {
        (WorkflowState::Created, _) => vec!["analyze"],
        (WorkflowState::InitialAnalyzed, Some(WorkflowPath::Lesion)) => vec!["xai"],
        (WorkflowState::InitialAnalyzed, Some(WorkflowPath::Condition)) => vec!["followup"],
        _ => vec![],
    }
}

/// The case document as served: plots and the image are linked by URL, or
/// inlined as base64 when asked.
pub fn case_view(case: &Case, include_images: bool) -> Value {
    let b64 = |b: &[u8]| base64::engine::general_purpose::STANDARD.encode(b);
    let plots: Vec<Value> = case
        .artifacts
        .plots
        .iter()
        .map(|p| {
            let mut v = json!({ "name": p.name, "media_type": p.media_type, "url": format!("/cases/{}/plots/{}", case.id, p.name) });
            if include_images {
                v["data_base64"] = json!(b64(&p.bytes));
            }
            v
        })
        .collect();
    let mut artifacts = serde_json::to_value(&case.artifacts).expect("artifacts serialize");
    artifacts["plots"] = json!(plots);
    let failure = match &case.state {
        WorkflowState::Failed(reason) => Some(reason.clone()),
        _ => None,
    };
    let mut view = json!({
        "id": case.id,
        "created_at": case.created_at,
        "image_sha256": case.image_sha256,
        "state": case.state.name(),
        "failure_reason": failure,
        "allowed_actions": allowed_actions(case),
        "audit": case.audit,
        "image_url": format!("/cases/{}/image", case.id),
        "artifacts": artifacts,
    });
    if include_images {
        view["image_base64"] = json!(b64(&case.image));
    }
    view
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    include_images: bool,
}

async fn report(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Json<Value>, ApiError> {
    let case = tokio::task::spawn_blocking(move || state.store.load(&id)).await??;
    Ok(Json(case_view(&case, q.include_images)))
}

fn media_type(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else if bytes.starts_with(&[0xff, 0xd8]) {
        "image/jpeg"
    } else {
        "application/octet-stream"
    }
}

async fn image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let bytes = state.store.image(&id)?;
    Ok(([(header::CONTENT_TYPE, media_type(&bytes))], bytes).into_response())
}

async fn plot(
    State(state): State<Arc<AppState>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let bytes = state.store.plot(&id, &name)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

fn eval_error(e: EvalError) -> ApiError {
    match e {
        EvalError::Corpus(issues) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", format!("{} problem(s) in the corpus", issues.len()))
                .with(json!({ "issues": issues }))
        }
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", other.to_string()),
    }
}

/// Providers for an evaluation run: in mock mode a corpus may carry its
/// own `mock/` fixtures.
fn eval_providers(state: &AppState, corpus: &Path) -> Result<ProviderSet, ApiError> {
    let dir = corpus.join("mock");
    if state.config.providers.mode == ProviderMode::Mock && dir.is_dir() {
        let mock = MockProvider::from_dir(&dir)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", e.to_string()))?;
        return Ok(ProviderSet::from_mock(Arc::new(mock), state.config.retry));
    }
    Ok(state.providers.clone())
}

async fn create_eval_run(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let s = state.clone();
    idempotent(&state, &headers, "POST /eval/runs", || async move {
        let request: EvalRunRequest = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
        let weights = request.weights.unwrap_or(s.config.weights);
        weights.validate().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
        let corpus = s.resolve(&request.corpus);
        let reviews_path = s.resolve(&request.reviews);
        let st = s.clone();
        let (cases, reviews, providers) = tokio::task::spawn_blocking(move || {
            let lexicon = st.lexicon.as_deref().unwrap_or(Lexicon::default_lexicon());
            let cases = load_corpus_with(&corpus, lexicon).map_err(eval_error)?;
            let reviews = read_reviews(&reviews_path).map_err(eval_error)?;
            let providers = eval_providers(&st, &corpus)?;
            Ok::<_, ApiError>((cases, reviews, providers))
        })
        .await??;

        let run = EvalRun {
            id: uuid::Uuid::new_v4().to_string(),
            status: EvalStatus::Running,
            created_at: Utc::now(),
            finished_at: None,
            request: request.clone(),
            progress: EvalProgress { done: 0, total: cases.len() },
            outcome: None,
            error: None,
        };
        s.store.save_json("eval-runs", &run.id, &run)?;
        s.runs.lock().insert(run.id.clone(), run.clone());

        let st = s.clone();
        let id = run.id.clone();
        let scoring = ScoringConfig {
            entity_template: request.entity_template.clone().or_else(|| s.config.scoring.entity_template.clone()),
            workers: s.config.scoring.workers,
        };
        tokio::task::spawn_blocking(move || {
            let progress = |done: usize, total: usize| {
                if let Some(r) = st.runs.lock().get_mut(&id) {
                    r.progress = EvalProgress { done, total };
                }
            };
            let result = evaluate_cases(&cases, reviews, &providers, &weights, &scoring, &progress);
            let mut runs = st.runs.lock();
            let run = runs.get_mut(&id).expect("run registered");
            run.finished_at = Some(Utc::now());
            match result {
                Ok(outcome) => {
                    run.status = EvalStatus::Complete;
                    run.outcome = Some(outcome);
                }
                Err(e) => {
                    run.status = EvalStatus::Failed;
                    run.error = Some(e.to_string());
                }
            }
            if let Err(e) = st.store.save_json("eval-runs", &id, run) {
                tracing::error!("evaluation run {id} not saved: {e}");
            }
        });
        Ok((StatusCode::ACCEPTED, serde_json::to_value(&run).expect("runs serialize")))
    })
    .await
}

async fn get_eval_run(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<EvalRun>, ApiError> {
    if let Some(run) = state.runs.lock().get(&id) {
        return Ok(Json(run.clone()));
    }
    Ok(Json(state.store.load_json("eval-runs", &id)?))
}

/// Binds the configured address and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let providers = config.build_providers()?;
    let state = AppState::new(config.clone(), providers).map_err(|e| e.message)?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
