//! HTTP service over a data directory:
//!
//! ```text
//! <data>/subjects/<id>.svol     label volumes
//! <data>/volumes/<id>.svol      priors and samples
//! <data>/checkpoints/<id>.sgmc  trained denoisers
//! <data>/jobs/<id>.json         job records
//! <data>/tissues.csv            optional tissue table override
//! <data>/presets.json           optional sequence preset override
//! ```
//!
//! Bodies are JSON; errors are `{"error": ..., "field": ...}` with 400 for
//! schema violations, 404 for unknown ids and 409 for conflicting writes or
//! duplicate active jobs.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

use priorsynth::anatomy::{compose_anatomy, CompositionRecipe};
use priorsynth::diffusion::{sample_volume, Checkpoint};
use priorsynth::metrics::{evaluate_pairs, EvalConfig, MetricKind};
use priorsynth::physiosynth::{simulate_prior, SequenceParams, SequencePresets, TissueParameterTable};
use priorsynth::volumes::{decode_volume, encode_label, encode_scalar, Volume, Window};
use priorsynth::{Error as CoreError, Exec, LabelVolume};

use crate::digest::sha256_hex;
use crate::render::{default_window, parse_window, render_slice_png};

pub const API_VERSION: &str = "v1";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn bad(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field: Some(field.to_string()),
        }
    }

    fn not_found(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            field: Some(field.to_string()),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::Lookup(_) => StatusCode::NOT_FOUND,
            CoreError::Io { .. } | CoreError::Divergence { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "field": self.field}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Deserializes a JSON body, naming the offending field on failure.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad(&path, e.inner().to_string())
    })
}

/// Ids are file stems: ASCII letters, digits, `_`, `-` and `.`, not starting
/// with `.`.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn check_id(field: &str, id: &str) -> ApiResult<()> {
    if valid_id(id) {
        Ok(())
    } else {
        Err(ApiError::bad(field, format!("invalid id {id:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Simulate,
    Compose,
    Train,
    Sample,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_active(self) -> bool {
        matches!(self, JobStatus::Queued | JobStatus::Running)
    }

    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Queued, JobStatus::Running) | (JobStatus::Running, JobStatus::Done | JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobTiming {
    pub queued_ms: Option<u64>,
    pub run_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub inputs_digest: String,
    /// Volume ids written by the job.
    pub outputs: Vec<String>,
    pub error: Option<String>,
    pub timing: JobTiming,
}

impl JobRecord {
    pub fn queued(job_id: String, kind: JobKind, inputs_digest: String) -> Self {
        JobRecord {
            job_id,
            kind,
            status: JobStatus::Queued,
            inputs_digest,
            outputs: Vec::new(),
            error: None,
            timing: JobTiming::default(),
        }
    }

    pub fn advance(&mut self, next: JobStatus) -> Result<(), String> {
        if !self.status.can_become(next) {
            return Err(format!("job {} cannot go from {:?} to {next:?}", self.job_id, self.status));
        }
        self.status = next;
        Ok(())
    }
}

struct Store {
    root: PathBuf,
}

impl Store {
    fn open(root: &Path) -> std::io::Result<Self> {
        for d in ["subjects", "volumes", "checkpoints", "jobs"] {
            std::fs::create_dir_all(root.join(d))?;
        }
        Ok(Store { root: root.to_path_buf() })
    }

    fn path(&self, dir: &str, id: &str, ext: &str) -> PathBuf {
        self.root.join(dir).join(format!("{id}.{ext}"))
    }

    fn list(&self, dir: &str, ext: &str) -> std::io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for e in std::fs::read_dir(self.root.join(dir))? {
            let p = e?.path();
            if p.extension().and_then(|x| x.to_str()) == Some(ext) {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    if valid_id(stem) {
                        ids.push(stem.to_string());
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn read(&self, dir: &str, id: &str, ext: &str) -> ApiResult<Option<Vec<u8>>> {
        match std::fs::read(self.path(dir, id, ext)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }

    /// Writes through a temporary file so readers never see partial data.
    fn write(&self, dir: &str, id: &str, ext: &str, bytes: &[u8]) -> ApiResult<()> {
        let target = self.path(dir, id, ext);
        let tmp = self.root.join(dir).join(format!(".{id}.{ext}.tmp"));
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, &target))
            .map_err(|e| ApiError::internal(format!("writing {}: {e}", target.display())))
    }

    /// Writes `bytes` unless a different artifact already has this id.
    /// Returns whether the file was created.
    fn put_once(&self, dir: &str, id: &str, ext: &str, bytes: &[u8]) -> ApiResult<bool> {
        match self.read(dir, id, ext)? {
            Some(existing) if existing == bytes => Ok(false),
            Some(_) => Err(ApiError::conflict(format!("{dir}/{id} already exists with different content"))),
            None => self.write(dir, id, ext, bytes).map(|_| true),
        }
    }
}

struct Inner {
    store: Store,
    table: TissueParameterTable,
    presets: SequencePresets,
    jobs: Mutex<BTreeMap<String, JobRecord>>,
    pool: Semaphore,
    writes: tokio::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens (and lays out) `data_dir`. Finished job records are reloaded.
    pub fn open(data_dir: &Path, workers: usize) -> anyhow::Result<Self> {
        let store = Store::open(data_dir)?;
        let tissues = data_dir.join("tissues.csv");
        let table = if tissues.exists() {
            TissueParameterTable::from_csv_path(&tissues)?
        } else {
            TissueParameterTable::default()
        };
        let presets_path = data_dir.join("presets.json");
        let presets = if presets_path.exists() {
            SequencePresets::from_path(&presets_path)?
        } else {
            SequencePresets::default()
        };
        let mut jobs = BTreeMap::new();
        for id in store.list("jobs", "json")? {
            let text = std::fs::read_to_string(store.path("jobs", &id, "json"))?;
            if let Ok(rec) = serde_json::from_str::<JobRecord>(&text) {
                if !rec.status.is_active() {
                    jobs.insert(rec.job_id.clone(), rec);
                }
            }
        }
        Ok(AppState(Arc::new(Inner {
            store,
            table,
            presets,
            jobs: Mutex::new(jobs),
            pool: Semaphore::new(workers.max(1)),
            writes: tokio::sync::Mutex::new(()),
        })))
    }

    fn persist_job(&self, rec: &JobRecord) -> ApiResult<()> {
        let text = serde_json::to_string_pretty(rec).expect("job record serializes");
        self.0.store.write("jobs", &rec.job_id, "json", text.as_bytes())
    }

    /// Applies a status transition atomically and persists the record.
    fn transition(&self, id: &str, next: JobStatus, edit: impl FnOnce(&mut JobRecord)) -> ApiResult<JobRecord> {
        let rec = {
            let mut jobs = self.0.jobs.lock().expect("job table lock");
            let rec = jobs.get_mut(id).ok_or_else(|| ApiError::internal(format!("job {id} vanished")))?;
            rec.advance(next).map_err(ApiError::internal)?;
            edit(rec);
            rec.clone()
        };
        self.persist_job(&rec)?;
        Ok(rec)
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.0.jobs.lock().expect("job table lock").get(id).cloned()
    }

    fn load_volume(&self, field: &str, id: &str) -> ApiResult<(Volume, Vec<u8>)> {
        check_id(field, id)?;
        for dir in ["volumes", "subjects"] {
            if let Some(bytes) = self.0.store.read(dir, id, "svol")? {
                return Ok((decode_volume(&bytes)?, bytes));
            }
        }
        Err(ApiError::not_found(field, format!("no volume {id:?}")))
    }

    fn load_subject(&self, field: &str, id: &str) -> ApiResult<LabelVolume> {
        check_id(field, id)?;
        let bytes = self
            .0
            .store
            .read("subjects", id, "svol")?
            .ok_or_else(|| ApiError::not_found(field, format!("no subject {id:?}")))?;
        Ok(decode_volume(&bytes)?.into_label()?)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/version", get(version))
        .route("/api/tissues", get(tissues))
        .route("/api/presets", get(presets))
        .route("/api/subjects", get(subjects))
        .route("/api/volumes", get(volumes))
        .route("/api/slice", get(slice))
        .route("/api/compose", post(compose))
        .route("/api/simulate", post(simulate))
        .route("/api/sample", post(sample))
        .route("/api/jobs/{id}", get(job))
        .route("/api/eval", post(eval))
        .with_state(state)
}

pub async fn serve(data_dir: &Path, addr: SocketAddr, workers: usize) -> anyhow::Result<()> {
    let state = AppState::open(data_dir, workers)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving {} on http://{}", data_dir.display(), listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn version() -> Json<serde_json::Value> {
    Json(json!({"api_version": API_VERSION, "tool_version": env!("CARGO_PKG_VERSION")}))
}

async fn tissues(State(s): State<AppState>) -> Json<serde_json::Value> {
    let rows: Vec<_> = s.0.table.rows().cloned().collect();
    Json(json!({"version": s.0.table.version(), "rows": rows}))
}

async fn presets(State(s): State<AppState>) -> Json<SequencePresets> {
    Json(s.0.presets.clone())
}

#[derive(Debug, Serialize)]
struct SubjectInfo {
    id: String,
    dims: [usize; 3],
    spacing: [f32; 3],
    classes: Vec<u16>,
}

async fn subjects(State(s): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let mut out = Vec::new();
    for id in s.0.store.list("subjects", "svol").map_err(|e| ApiError::internal(e.to_string()))? {
        let v = s.load_subject("id", &id)?;
        let (d, sp) = (v.dims(), v.spacing());
        out.push(SubjectInfo {
            id,
            dims: [d.nx, d.ny, d.nz],
            spacing: [sp.sx, sp.sy, sp.sz],
            classes: v.classes(),
        });
    }
    Ok(Json(json!({ "subjects": out })))
}

async fn volumes(State(s): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let mut out = Vec::new();
    for id in s.0.store.list("volumes", "svol").map_err(|e| ApiError::internal(e.to_string()))? {
        let (v, _) = s.load_volume("id", &id)?;
        if let Volume::Scalar(v) = v {
            let d = v.dims();
            out.push(json!({"id": id, "modality": v.modality(), "dims": [d.nx, d.ny, d.nz]}));
        }
    }
    Ok(Json(json!({ "volumes": out })))
}

/// `GET /api/slice?vol=ID&z=K&window=ct|mr|LO,HI`
async fn slice(State(s): State<AppState>, Query(q): Query<BTreeMap<String, String>>) -> ApiResult<Response> {
    let vol = q.get("vol").ok_or_else(|| ApiError::bad("vol", "missing query parameter"))?;
    let z: usize = match q.get("z") {
        Some(z) => z.parse().map_err(|_| ApiError::bad("z", format!("not a slice index: {z:?}")))?,
        None => 0,
    };
    let (v, _) = s.load_volume("vol", vol)?;
    let w = match q.get("window") {
        Some(w) => parse_window(w).map_err(|e| ApiError::bad("window", format!("{e:#}")))?,
        None => default_window(&v),
    };
    if z >= v.dims().nz {
        return Err(ApiError::bad("z", format!("slice {z} out of range 0..{}", v.dims().nz)));
    }
    let png = render_slice_png(&v, z, w).map_err(|e| ApiError::internal(format!("{e:#}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

/// `POST /api/compose` with a composition recipe; 201 when the subject is
/// new, 200 when an identical one already exists.
async fn compose(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let recipe: CompositionRecipe = parse_body(&body)?;
    recipe.validate().map_err(|e| ApiError::bad("entries", e.to_string()))?;
    let out_id = recipe.output_subject_id.clone().unwrap_or_else(|| "composite".into());
    check_id("output_subject_id", &out_id)?;
    let mut subjects = BTreeMap::new();
    subjects.insert(recipe.contour_source.clone(), s.load_subject("contour_source", &recipe.contour_source)?);
    for (i, e) in recipe.entries.iter().enumerate() {
        if !subjects.contains_key(&e.source_subject_id) {
            let field = format!("entries[{i}].source_subject_id");
            subjects.insert(e.source_subject_id.clone(), s.load_subject(&field, &e.source_subject_id)?);
        }
    }
    let comp = compose_anatomy(&subjects, &recipe)?;
    let bytes = encode_label(&comp.labels)?;
    let created = {
        let _w = s.0.writes.lock().await;
        s.0.store.put_once("subjects", &out_id, "svol", &bytes)?
    };
    let mut by_source: BTreeMap<String, usize> = BTreeMap::new();
    for ((src, _), n) in comp.counts_by_source() {
        *by_source.entry(src).or_default() += n;
    }
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({"subject_id": out_id, "sources": comp.sources, "voxels_by_source": by_source}))).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    subject_id: String,
    preset: Option<String>,
    params: Option<SequenceParams>,
}

/// `POST /api/simulate`; the prior id is `<subject>-<kind>-<digest>` so equal
/// requests map to the same volume.
async fn simulate(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: SimulateRequest = parse_body(&body)?;
    let params = match (&req.preset, req.params) {
        (Some(name), None) => s.0.presets.get(name).map_err(|e| ApiError::not_found("preset", e.to_string()))?,
        (None, Some(p)) => {
            p.validate().map_err(|e| ApiError::bad("params", e.to_string()))?;
            p
        }
        _ => return Err(ApiError::bad("params", "give exactly one of `preset` and `params`")),
    };
    let labels = s.load_subject("subject_id", &req.subject_id)?;
    let st = s.clone();
    let vol = tokio::task::spawn_blocking(move || simulate_prior(&labels, &st.0.table, &params))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let params_json = serde_json::to_string(&params).expect("params serialize");
    let kind = serde_json::to_value(params.kind).expect("kind serializes");
    let id = format!(
        "{}-{}-{}",
        req.subject_id,
        kind.as_str().unwrap_or("prior"),
        &sha256_hex(params_json.as_bytes())[..8]
    );
    let bytes = encode_scalar(&vol)?;
    let created = {
        let _w = s.0.writes.lock().await;
        s.0.store.put_once("volumes", &id, "svol", &bytes)?
    };
    let d = vol.dims();
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((
        status,
        Json(json!({"volume_id": id, "modality": vol.modality(), "dims": [d.nx, d.ny, d.nz], "params": params})),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRequest {
    prior_id: String,
    checkpoint_id: String,
    #[serde(default)]
    seed: u64,
}

/// `POST /api/sample` queues a sampling job; the job id is derived from the
/// input digests and seed. 202 for a new job, 200 for a finished identical
/// job, 409 while an identical job is queued or running.
async fn sample(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: SampleRequest = parse_body(&body)?;
    let (prior, prior_bytes) = s.load_volume("prior_id", &req.prior_id)?;
    let prior = prior.into_scalar().map_err(|e| ApiError::bad("prior_id", e.to_string()))?;
    check_id("checkpoint_id", &req.checkpoint_id)?;
    let ckpt_bytes = s
        .0
        .store
        .read("checkpoints", &req.checkpoint_id, "sgmc")?
        .ok_or_else(|| ApiError::not_found("checkpoint_id", format!("no checkpoint {:?}", req.checkpoint_id)))?;
    let ckpt = Checkpoint::from_bytes(&ckpt_bytes).map_err(|e| ApiError::bad("checkpoint_id", e.to_string()))?;

    let mut material = Vec::with_capacity(prior_bytes.len() + ckpt_bytes.len() + 8);
    material.extend_from_slice(&prior_bytes);
    material.extend_from_slice(&ckpt_bytes);
    material.extend_from_slice(&req.seed.to_le_bytes());
    let digest = sha256_hex(&material);
    let job_id = format!("sample-{}", &digest[..16]);

    let rec = {
        let mut jobs = s.0.jobs.lock().expect("job table lock");
        match jobs.get(&job_id) {
            Some(r) if r.status.is_active() => {
                return Err(ApiError::conflict(format!("job {job_id} is already {:?}", r.status)));
            }
            Some(r) if r.status == JobStatus::Done => return Ok((StatusCode::OK, Json(r.clone())).into_response()),
            _ => {}
        }
        let rec = JobRecord::queued(job_id.clone(), JobKind::Sample, digest);
        jobs.insert(job_id.clone(), rec.clone());
        rec
    };
    s.persist_job(&rec)?;

    let st = s.clone();
    let queued_at = Instant::now();
    tokio::spawn(async move {
        let _permit = st.0.pool.acquire().await.expect("worker pool open");
        let queued_ms = queued_at.elapsed().as_millis() as u64;
        if st
            .transition(&job_id, JobStatus::Running, |r| r.timing.queued_ms = Some(queued_ms))
            .is_err()
        {
            return;
        }
        let started = Instant::now();
        let work = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, String> {
            let model = ckpt.model().map_err(|e| e.to_string())?;
            let sched = ckpt.header.schedule.build().map_err(|e| e.to_string())?;
            let out = sample_volume(&model, &prior, &sched, req.seed, Exec::default()).map_err(|e| e.to_string())?;
            encode_scalar(&out).map_err(|e| e.to_string())
        })
        .await
        .map_err(|e| e.to_string())
        .and_then(|r| r);
        let written = match work {
            Ok(bytes) => st.0.store.write("volumes", &job_id, "svol", &bytes).map_err(|e| e.message),
            Err(e) => Err(e),
        };
        let run_ms = Some(started.elapsed().as_millis() as u64);
        let _ = match written {
            Ok(()) => st.transition(&job_id, JobStatus::Done, |r| {
                r.outputs = vec![job_id.clone()];
                r.timing.run_ms = run_ms;
            }),
            Err(e) => st.transition(&job_id, JobStatus::Failed, |r| {
                r.error = Some(e);
                r.timing.run_ms = run_ms;
            }),
        };
    });
    Ok((StatusCode::ACCEPTED, Json(rec)).into_response())
}

async fn job(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<JobRecord>> {
    check_id("id", &id)?;
    s.job(&id).map(Json).ok_or_else(|| ApiError::not_found("id", format!("no job {id:?}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRequest {
    pred_id: String,
    ref_id: String,
    window: Option<(f64, f64)>,
    metrics: Option<Vec<MetricKind>>,
    hist_bins: Option<usize>,
}

/// `POST /api/eval` scores two scalar volumes slice by slice.
async fn eval(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: EvalRequest = parse_body(&body)?;
    let (pred, _) = s.load_volume("pred_id", &req.pred_id)?;
    let (reference, _) = s.load_volume("ref_id", &req.ref_id)?;
    let pred = pred.into_scalar().map_err(|e| ApiError::bad("pred_id", e.to_string()))?;
    let reference = reference.into_scalar().map_err(|e| ApiError::bad("ref_id", e.to_string()))?;
    if pred.dims() != reference.dims() {
        return Err(ApiError::bad("pred_id", format!("dims {:?} differ from reference {:?}", pred.dims(), reference.dims())));
    }
    let mut cfg = EvalConfig::for_window(Window::for_modality(reference.modality()));
    if let Some((lo, hi)) = req.window {
        Window::new(lo, hi).map_err(|e| ApiError::bad("window", e.to_string()))?;
        cfg.window = (lo, hi);
    }
    if let Some(m) = req.metrics {
        if m.is_empty() {
            return Err(ApiError::bad("metrics", "empty metric list"));
        }
        cfg.metrics = m;
    }
    if let Some(b) = req.hist_bins {
        cfg.hist_bins = b;
    }
    let pairs: Vec<_> = pred.slices().into_iter().zip(reference.slices()).collect();
    let dataset = req.ref_id.clone();
    let report = tokio::task::spawn_blocking(move || evaluate_pairs(&pairs, &cfg, &dataset, Exec::default()))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response())
}
