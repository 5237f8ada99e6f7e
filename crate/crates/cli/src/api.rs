//! HTTP boundary under `/v1`. Bodies are JSON except uploads (multipart) and
//! export downloads (CSV). Every error response is an [`ApiError`] whose
//! `code` is one of [`ERROR_CODES`].

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sonotab_core::evidence::EvidenceError;
use sonotab_core::export::ExportError;
use sonotab_core::jobs::{FileRef, JobConfig, JobError, JobManager, JobProgress};
use sonotab_core::schema::DEFAULT_SCHEMA_ID;
use sonotab_core::store::{HighlightLookupError, StoreError};
use sonotab_core::{default_schema, load_schema, ExportVersion, ReviewStore};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpListener;

use crate::config::{Config, ConfigInvalid};

pub const DEFAULT_EDITOR: &str = "reviewer";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

/// Every error code the service can return, with its HTTP status.
pub const ERROR_CODES: &[(&str, u16)] = &[
    ("BadRequest", 400),
    ("EmptyBatch", 400),
    ("UnknownRoute", 404),
    ("MethodNotAllowed", 405),
    ("BatchLimitExceeded", 413),
    ("UnknownSchema", 404),
    ("UnknownJob", 404),
    ("UnknownReport", 404),
    ("UnknownField", 404),
    ("UnknownDocument", 404),
    ("UnknownCohort", 404),
    ("UnknownExportVersion", 404),
    ("MissingEvidence", 404),
    ("AlreadyTerminal", 409),
    ("DuplicateReport", 409),
    ("SchemaMismatch", 409),
    ("ValueOutOfVocabulary", 422),
    ("InvalidValue", 422),
    ("IncompleteExtraction", 422),
    ("StorageError", 500),
    ("Internal", 500),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(status_of(code).is_some(), "undocumented error code {code}");
        ApiError {
            code: code.to_string(),
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new("BadRequest", message.to_string())
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new("Internal", message.to_string())
    }

    pub fn status(&self) -> StatusCode {
        status_of(&self.code)
            .and_then(|s| StatusCode::from_u16(s).ok())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

pub fn status_of(code: &str) -> Option<u16> {
    ERROR_CODES.iter().find(|(c, _)| *c == code).map(|(_, s)| *s)
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::DuplicateReport(id) => Self::new("DuplicateReport", message).with_detail(json!({ "report_id": id })),
            StoreError::UnknownReport(_) => Self::new("UnknownReport", message),
            StoreError::UnknownField(_) => Self::new("UnknownField", message),
            StoreError::UnknownSchema(_) => Self::new("UnknownSchema", message),
            StoreError::UnknownDocument(_) => Self::new("UnknownDocument", message),
            StoreError::UnknownCohort(_) => Self::new("UnknownCohort", message),
            StoreError::ValueOutOfVocabulary { field_id, token } => Self::new("ValueOutOfVocabulary", message)
                .with_detail(json!({ "field_id": field_id, "token": token })),
            StoreError::InvalidValue { field_id, reason } => {
                Self::new("InvalidValue", message).with_detail(json!({ "field_id": field_id, "reason": reason }))
            }
            StoreError::IncompleteExtraction => Self::new("IncompleteExtraction", message),
            StoreError::Export(ExportError::SchemaMismatch { .. }) => Self::new("SchemaMismatch", message),
            StoreError::Export(ExportError::Csv(_)) | StoreError::Io(_) => Self::new("StorageError", message),
        }
    }
}

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        let message = e.to_string();
        match e {
            JobError::EmptyBatch => Self::new("EmptyBatch", message),
            JobError::BatchLimitExceeded { count, limit } => {
                Self::new("BatchLimitExceeded", message).with_detail(json!({ "count": count, "limit": limit }))
            }
            JobError::UnknownSchema(_) => Self::new("UnknownSchema", message),
            JobError::UnknownJob(_) => Self::new("UnknownJob", message),
            JobError::AlreadyTerminal(state) => {
                Self::new("AlreadyTerminal", message).with_detail(json!({ "state": state }))
            }
            JobError::Io(_) => Self::new("StorageError", message),
        }
    }
}

impl From<HighlightLookupError> for ApiError {
    fn from(e: HighlightLookupError) -> Self {
        match e {
            HighlightLookupError::Store(e) => e.into(),
            HighlightLookupError::Evidence(e @ EvidenceError::MissingEvidence(_)) => {
                Self::new("MissingEvidence", e.to_string())
            }
            HighlightLookupError::Evidence(e @ EvidenceError::UnknownField(_)) => {
                Self::new("UnknownField", e.to_string())
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigInvalid),
    #[error("address {0} is already in use")]
    AddressInUse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ReviewStore>,
    pub jobs: Arc<JobManager>,
    pub spool_dir: PathBuf,
    pub max_files: usize,
    pub backend_name: String,
    pub schema_ids: Arc<Vec<String>>,
}

impl AppState {
    /// Validates the configuration, opens the store and starts the workers.
    pub fn from_config(config: &Config) -> Result<Self, ConfigInvalid> {
        config.validate()?;
        let store = ReviewStore::open(&config.data_dir)
            .map_err(|e| ConfigInvalid(format!("cannot open data_dir {}: {e}", config.data_dir.display())))?;
        let mut schema_ids = vec![store.register_schema(default_schema()).schema_id.clone()];
        for path in &config.schemas {
            let bytes =
                std::fs::read(path).map_err(|e| ConfigInvalid(format!("cannot read schema {}: {e}", path.display())))?;
            let schema = load_schema(&bytes).map_err(|e| ConfigInvalid(format!("{}: {e}", path.display())))?;
            schema_ids.push(store.register_schema(schema).schema_id.clone());
        }
        let store = Arc::new(store);
        let backend = config.build_backend()?;
        let backend_name = backend.name().to_string();
        let job_config = JobConfig {
            workers: config.workers,
            jobs_dir: Some(config.data_dir.join("jobs")),
            ..JobConfig::default()
        };
        let max_files = job_config.max_files;
        let jobs = JobManager::new(store.clone(), backend, Arc::new(config.load_hedges()?), job_config)
            .map_err(|e| ConfigInvalid(format!("cannot start job manager: {e}")))?;
        Ok(AppState {
            store,
            jobs: Arc::new(jobs),
            spool_dir: config.spool_dir.clone(),
            max_files,
            backend_name,
            schema_ids: Arc::new(schema_ids),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/jobs", post(submit_job).get(list_jobs))
        .route("/v1/jobs/{id}", get(job_progress))
        .route("/v1/jobs/{id}/cancel", post(cancel_job))
        .route("/v1/reports", get(list_reports))
        .route("/v1/reports/{id}/review", get(review))
        .route("/v1/reports/{id}/full", get(full))
        .route("/v1/reports/{id}/fields/{field_id}", put(edit_field))
        .route("/v1/reports/{id}/confirm/{field_id}", post(confirm_field))
        .route("/v1/reports/{id}/save", post(batch_save))
        .route("/v1/documents/{doc_id}", get(document))
        .route("/v1/documents/{doc_id}/highlight", get(highlight))
        .route("/v1/exports/{cohort}/{version}", get(export))
        .fallback(|| async { ApiError::new("UnknownRoute", "no such endpoint") })
        .method_not_allowed_fallback(|| async { ApiError::new("MethodNotAllowed", "method not allowed here") })
        // Batches of thousands of PDFs exceed any fixed body limit; the file
        // count is capped while streaming instead.
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

/// Validates the configuration, starts the workers and binds the socket.
pub async fn bind(config: &Config) -> Result<(TcpListener, AppState), ServeError> {
    let state = AppState::from_config(config)?;
    let addr: SocketAddr = config
        .listen_addr
        .parse()
        .map_err(|_| ConfigInvalid(format!("listen_addr `{}` is not a socket address", config.listen_addr)))?;
    let listener = TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::AddressInUse(config.listen_addr.clone()),
        _ => ServeError::Io(e),
    })?;
    Ok((listener, state))
}

/// Serves until `shutdown` resolves, then lets the workers finish the file
/// each is extracting.
pub async fn serve_until(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let jobs = state.jobs.clone();
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    tokio::task::spawn_blocking(move || jobs.shutdown())
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(())
}

pub async fn serve(config: &Config) -> Result<(), ServeError> {
    let (listener, state) = bind(config).await?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_until(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
    })
    .await
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

async fn health(State(st): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "backend": st.backend_name,
        "schemas": *st.schema_ids,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub total: usize,
    pub skipped: Vec<sonotab_core::jobs::SkippedFile>,
}

static UPLOADS: AtomicU64 = AtomicU64::new(0);

fn upload_dir(spool: &std::path::Path) -> PathBuf {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    spool.join(format!(
        "upload_{nanos:x}_{}_{}",
        std::process::id(),
        UPLOADS.fetch_add(1, Ordering::Relaxed)
    ))
}

/// Keeps the last path component and drops characters that are awkward in
/// file names. The original name is still reported to the job.
fn spool_name(index: usize, filename: &str) -> String {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or("");
    let clean: String = base
        .chars()
        .map(|c| if c.is_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    format!("{index:05}_{clean}")
}

async fn receive_upload(
    mut multipart: Multipart,
    dir: &std::path::Path,
    max_files: usize,
) -> Result<(Vec<FileRef>, Option<String>), ApiError> {
    let mut files = Vec::new();
    let mut schema_id = None;
    while let Some(mut field) = multipart.next_field().await.map_err(ApiError::bad_request)? {
        if field.name() == Some("schema_id") {
            schema_id = Some(field.text().await.map_err(ApiError::bad_request)?.trim().to_string());
            continue;
        }
        let Some(filename) = field.file_name().map(str::to_string) else {
            return Err(ApiError::bad_request(format!(
                "unexpected form part `{}`",
                field.name().unwrap_or("")
            )));
        };
        if files.len() == max_files {
            return Err(JobError::BatchLimitExceeded {
                count: files.len() + 1,
                limit: max_files,
            }
            .into());
        }
        if files.is_empty() {
            tokio::fs::create_dir_all(dir).await.map_err(|e| ApiError::new("StorageError", e.to_string()))?;
        }
        let path = dir.join(spool_name(files.len(), &filename));
        let mut out = tokio::fs::File::create(&path)
            .await
            .map_err(|e| ApiError::new("StorageError", e.to_string()))?;
        while let Some(chunk) = field.chunk().await.map_err(ApiError::bad_request)? {
            out.write_all(&chunk).await.map_err(|e| ApiError::new("StorageError", e.to_string()))?;
        }
        out.flush().await.map_err(|e| ApiError::new("StorageError", e.to_string()))?;
        files.push(FileRef::path(filename, path));
    }
    Ok((files, schema_id))
}

async fn submit_job(
    State(st): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<JobAccepted>), ApiError> {
    let multipart = multipart.map_err(ApiError::bad_request)?;
    let dir = upload_dir(&st.spool_dir);
    let received = receive_upload(multipart, &dir, st.max_files).await;
    let submitted = match received {
        Ok((files, schema_id)) => {
            let schema_id = schema_id.filter(|s| !s.is_empty()).unwrap_or_else(|| DEFAULT_SCHEMA_ID.to_string());
            let jobs = st.jobs.clone();
            blocking(move || {
                let id = jobs.submit(files, &schema_id)?;
                Ok(jobs.progress(&id)?)
            })
            .await
        }
        Err(e) => Err(e),
    };
    match submitted {
        Ok(progress) => {
            spawn_spool_reaper(st.jobs.clone(), progress.job_id.clone(), dir);
            Ok((
                StatusCode::ACCEPTED,
                Json(JobAccepted {
                    job_id: progress.job_id,
                    total: progress.total,
                    skipped: progress.skipped,
                }),
            ))
        }
        Err(e) => {
            let _ = tokio::fs::remove_dir_all(&dir).await;
            Err(e)
        }
    }
}

/// Removes a job's spooled uploads once the job is terminal.
fn spawn_spool_reaper(jobs: Arc<JobManager>, job_id: String, dir: PathBuf) {
    tokio::spawn(async move {
        loop {
            tokio::time::sleep(Duration::from_millis(500)).await;
            match jobs.progress(&job_id) {
                Ok(p) if !p.state.is_terminal() => continue,
                _ => break,
            }
        }
        let _ = tokio::fs::remove_dir_all(&dir).await;
    });
}

async fn list_jobs(State(st): State<AppState>) -> Json<Vec<JobProgress>> {
    Json(st.jobs.list())
}

async fn job_progress(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<JobProgress>, ApiError> {
    Ok(Json(st.jobs.progress(&id)?))
}

async fn cancel_job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<JobProgress>, ApiError> {
    let jobs = st.jobs.clone();
    Ok(Json(blocking(move || Ok(jobs.cancel(&id)?)).await?))
}

#[derive(Debug, Deserialize)]
pub struct Page {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

async fn list_reports(
    State(st): State<AppState>,
    page: Result<Query<Page>, QueryRejection>,
) -> Result<Json<Value>, ApiError> {
    let Query(page) = page.map_err(ApiError::bad_request)?;
    let offset = page.offset.unwrap_or(0);
    let limit = page.limit.unwrap_or(DEFAULT_PAGE_SIZE).min(MAX_PAGE_SIZE);
    let (total, reports) = st.store.list_reports(offset, limit);
    Ok(Json(json!({
        "total": total,
        "offset": offset,
        "limit": limit,
        "reports": reports,
    })))
}

async fn review(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(st.store.review_payload(&id)?).map_err(ApiError::internal)?))
}

async fn full(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(st.store.full_payload(&id)?).map_err(ApiError::internal)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EditBody {
    value: Option<String>,
    editor: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfirmBody {
    editor: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveEdit {
    field_id: String,
    value: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveBody {
    edits: Vec<SaveEdit>,
    editor: Option<String>,
}

fn editor(e: Option<String>) -> String {
    e.filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_EDITOR.to_string())
}

async fn edit_field(
    State(st): State<AppState>,
    Path((id, field_id)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: EditBody = parse_json(&body)?;
    let store = st.store.clone();
    let state = blocking(move || {
        Ok(store.apply_edit(&id, &field_id, body.value.as_deref(), &editor(body.editor))?)
    })
    .await?;
    Ok(Json(serde_json::to_value(state).map_err(ApiError::internal)?))
}

async fn confirm_field(
    State(st): State<AppState>,
    Path((id, field_id)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: ConfirmBody = if body.iter().all(u8::is_ascii_whitespace) { ConfirmBody::default() } else { parse_json(&body)? };
    let store = st.store.clone();
    let state = blocking(move || Ok(store.confirm_field(&id, &field_id, &editor(body.editor))?)).await?;
    Ok(Json(serde_json::to_value(state).map_err(ApiError::internal)?))
}

async fn batch_save(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: SaveBody = parse_json(&body)?;
    let edits: Vec<(String, Option<String>)> = body.edits.into_iter().map(|e| (e.field_id, e.value)).collect();
    let store = st.store.clone();
    let who = editor(body.editor);
    let receipt = blocking(move || Ok(store.batch_save(&id, &edits, &who)?)).await?;
    Ok(Json(serde_json::to_value(receipt).map_err(ApiError::internal)?))
}

async fn document(State(st): State<AppState>, Path(doc_id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = st.store.clone();
    let doc = blocking(move || Ok(store.document(&doc_id)?)).await?;
    Ok(Json(serde_json::to_value(&*doc).map_err(ApiError::internal)?))
}

#[derive(Debug, Deserialize)]
struct HighlightQuery {
    field: String,
}

async fn highlight(
    State(st): State<AppState>,
    Path(doc_id): Path<String>,
    query: Result<Query<HighlightQuery>, QueryRejection>,
) -> Result<Json<Value>, ApiError> {
    let Query(q) = query.map_err(ApiError::bad_request)?;
    let payload = st.store.highlight(&doc_id, &q.field)?;
    Ok(Json(serde_json::to_value(payload).map_err(ApiError::internal)?))
}

async fn export(
    State(st): State<AppState>,
    Path((cohort, version)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let version = version.strip_suffix(".csv").unwrap_or(&version);
    let Some(version) = ExportVersion::parse(version) else {
        return Err(ApiError::new(
            "UnknownExportVersion",
            format!("export version must be `machine` or `human`, got `{version}`"),
        ));
    };
    let store = st.store.clone();
    let name = sonotab_core::store::export_file_name(&cohort, version);
    let bytes = blocking(move || Ok(store.export(&cohort, version)?)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\"")),
        ],
        bytes,
    )
        .into_response())
}
