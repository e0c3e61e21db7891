//! HTTP service: dataset uploads, asynchronous summary jobs and read-only
//! access to finished summaries.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;
use tivy_core::export::{encode_render_binary, render_buffers, summary_document, RenderBuffers, SummaryDocument};
use tivy_core::ingest::{load_csv, load_csv_reader, normalize, CsvOptions, Layout, Normalization};
use tivy_core::model::{SummaryParams, TimeSeriesDataset};
use tivy_core::pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// A finished summary. Never modified once published.
#[derive(Debug)]
pub struct Published {
    pub document: SummaryDocument,
    pub render: RenderBuffers,
    pub render_binary: Vec<u8>,
}

#[derive(Debug, Clone)]
struct Job {
    dataset_id: String,
    status: JobStatus,
    error: Option<String>,
    result: Option<Arc<Published>>,
}

struct JobRequest {
    job_id: String,
    dataset: Arc<TimeSeriesDataset>,
    params: SummaryParams,
}

pub struct AppState {
    datasets: RwLock<HashMap<String, Arc<TimeSeriesDataset>>>,
    jobs: RwLock<HashMap<String, Job>>,
    queue: mpsc::UnboundedSender<JobRequest>,
    next_id: AtomicU64,
}

/// Receiving end of the job queue, consumed by [`spawn_worker`].
pub struct JobQueue(mpsc::UnboundedReceiver<JobRequest>);

impl AppState {
    pub fn new() -> (Arc<Self>, JobQueue) {
        let (tx, rx) = mpsc::unbounded_channel();
        let state = Arc::new(Self {
            datasets: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            queue: tx,
            next_id: AtomicU64::new(1),
        });
        (state, JobQueue(rx))
    }

    pub fn insert_dataset(&self, id: impl Into<String>, ds: TimeSeriesDataset) {
        self.datasets.write().unwrap().insert(id.into(), Arc::new(ds));
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn set_job(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.jobs.write().unwrap().get_mut(id) {
            f(job);
        }
    }
}

fn compute(ds: &TimeSeriesDataset, params: &SummaryParams) -> Result<Published, String> {
    let run = pipeline::run(ds, params).map_err(|e| e.to_string())?;
    let document = summary_document(&run.artifact, ds, Some(run.timings));
    let render = render_buffers(&run.artifact, ds);
    let render_binary = encode_render_binary(&render);
    Ok(Published {
        document,
        render,
        render_binary,
    })
}

/// Runs queued jobs one at a time until every sender is dropped.
pub fn spawn_worker(state: Arc<AppState>, queue: JobQueue) -> tokio::task::JoinHandle<()> {
    let JobQueue(mut rx) = queue;
    tokio::spawn(async move {
        while let Some(req) = rx.recv().await {
            state.set_job(&req.job_id, |j| j.status = JobStatus::Running);
            log::info!("job {} running", req.job_id);
            let outcome = tokio::task::spawn_blocking(move || compute(&req.dataset, &req.params))
                .await
                .unwrap_or_else(|e| Err(format!("worker panicked: {e}")));
            match outcome {
                Ok(p) => state.set_job(&req.job_id, |j| {
                    j.status = JobStatus::Done;
                    j.result = Some(Arc::new(p));
                }),
                Err(msg) => {
                    log::warn!("job {} failed: {msg}", req.job_id);
                    state.set_job(&req.job_id, |j| {
                        j.status = JobStatus::Failed;
                        j.error = Some(msg);
                    })
                }
            }
        }
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}/series/{series_id}", get(get_series))
        .route("/summaries", post(submit_summary))
        .route("/jobs/{id}", get(get_job))
        .route("/summaries/{id}", get(get_summary))
        .route("/summaries/{id}/groups", get(get_groups))
        .route("/summaries/{id}/render", get(get_render))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

/// Query options of `POST /datasets`.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct UploadOptions {
    pub layout: Layout,
    pub header: bool,
    pub id_column: bool,
    pub trim_trailing_zeros: bool,
    pub interpolate: Option<usize>,
    pub normalize: Normalization,
}

impl UploadOptions {
    fn csv(&self) -> CsvOptions {
        CsvOptions {
            layout: self.layout,
            has_header: self.header,
            id_column: self.id_column,
            trim_trailing_zeros: self.trim_trailing_zeros,
            interpolate: self.interpolate,
        }
    }
}

async fn upload_dataset(
    State(state): State<Arc<AppState>>,
    Query(opts): Query<UploadOptions>,
    body: Bytes,
) -> Response {
    let ds = match load_csv_reader(body.as_ref(), &opts.csv()).and_then(|d| normalize(&d, opts.normalize)) {
        Ok(ds) => ds,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let id = loop {
        let id = state.fresh_id("d");
        if !state.datasets.read().unwrap().contains_key(&id) {
            break id;
        }
    };
    let (count, len) = (ds.len(), ds.series_len());
    state.insert_dataset(id.clone(), ds);
    (
        StatusCode::CREATED,
        Json(json!({ "dataset_id": id, "series": count, "series_len": len })),
    )
        .into_response()
}

async fn get_series(
    State(state): State<Arc<AppState>>,
    UrlPath((id, series_id)): UrlPath<(String, String)>,
) -> Response {
    let Some(ds) = state.datasets.read().unwrap().get(&id).cloned() else {
        return error(StatusCode::NOT_FOUND, format!("unknown dataset {id}"));
    };
    match ds.series_ids().iter().position(|s| *s == series_id) {
        Some(i) => Json(json!({ "id": series_id, "values": ds.row(i) })).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown series {series_id}")),
    }
}

#[derive(Debug, Deserialize)]
struct SummaryRequest {
    dataset_id: String,
    #[serde(default)]
    params: SummaryParams,
}

async fn submit_summary(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: SummaryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let Some(ds) = state.datasets.read().unwrap().get(&req.dataset_id).cloned() else {
        return error(StatusCode::NOT_FOUND, format!("unknown dataset {}", req.dataset_id));
    };
    if let Err(e) = pipeline::validate(&req.params, &ds) {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let job_id = state.fresh_id("j");
    state.jobs.write().unwrap().insert(
        job_id.clone(),
        Job {
            dataset_id: req.dataset_id,
            status: JobStatus::Queued,
            error: None,
            result: None,
        },
    );
    let sent = state.queue.send(JobRequest {
        job_id: job_id.clone(),
        dataset: ds,
        params: req.params,
    });
    if sent.is_err() {
        state.set_job(&job_id, |j| {
            j.status = JobStatus::Failed;
            j.error = Some("job queue closed".into());
        });
    }
    (StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response()
}

fn job_body(id: &str, job: &Job) -> serde_json::Value {
    json!({
        "job_id": id,
        "dataset_id": job.dataset_id,
        "status": job.status,
        "error": job.error,
    })
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match state.jobs.read().unwrap().get(&id) {
        Some(job) => Json(job_body(&id, job)).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown job {id}")),
    }
}

/// The published summary, or the response explaining why there is none.
fn published(state: &AppState, id: &str) -> Result<Arc<Published>, Response> {
    let jobs = state.jobs.read().unwrap();
    let Some(job) = jobs.get(id) else {
        return Err(error(StatusCode::NOT_FOUND, format!("unknown summary {id}")));
    };
    match (&job.result, job.status) {
        (Some(p), _) => Ok(p.clone()),
        (None, JobStatus::Failed) => Err((StatusCode::INTERNAL_SERVER_ERROR, Json(job_body(id, job))).into_response()),
        (None, _) => Err((StatusCode::CONFLICT, Json(job_body(id, job))).into_response()),
    }
}

async fn get_summary(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match published(&state, &id) {
        Ok(p) => Json(&p.document).into_response(),
        Err(r) => r,
    }
}

async fn get_groups(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match published(&state, &id) {
        Ok(p) => Json(&p.document.groups).into_response(),
        Err(r) => r,
    }
}

#[derive(Debug, Default, Deserialize)]
struct RenderQuery {
    format: Option<String>,
}

async fn get_render(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RenderQuery>,
) -> Response {
    let p = match published(&state, &id) {
        Ok(p) => p,
        Err(r) => return r,
    };
    match q.format.as_deref() {
        None | Some("json") => Json(&p.render).into_response(),
        Some("binary") => ([(header::CONTENT_TYPE, "application/octet-stream")], p.render_binary.clone()).into_response(),
        Some(other) => error(StatusCode::BAD_REQUEST, format!("unknown format {other}")),
    }
}

/// Loads every `*.csv` in `dir`, keyed by file stem.
pub fn preload(state: &AppState, dir: &Path, opts: &CsvOptions, norm: Normalization) -> anyhow::Result<usize> {
    let mut loaded = 0;
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    for path in paths {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let ds = normalize(&load_csv(&path, opts)?, norm)?;
        log::info!("loaded dataset {stem}: {} series of length {}", ds.len(), ds.series_len());
        state.insert_dataset(stem, ds);
        loaded += 1;
    }
    Ok(loaded)
}

pub async fn serve(host: &str, port: u16, state: Arc<AppState>, queue: JobQueue) -> anyhow::Result<()> {
    spawn_worker(state.clone(), queue);
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
