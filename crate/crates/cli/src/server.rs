use std::collections::BTreeMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use vidsift_core::geometry::GridGeometry;
use vidsift_core::ingest::{Archive, ArchiveManifest};
use vidsift_core::search::{compile_query, Algorithm, Query, SearchParams};
use vidsift_core::Error;

use crate::jobs::{JobRecord, JobRequest, JobState, JobStore};

pub struct AppState {
    pub archives: BTreeMap<String, Arc<Archive>>,
    pub jobs: JobStore,
}

impl AppState {
    /// Must be called inside a Tokio runtime.
    pub fn new(archives: BTreeMap<String, Arc<Archive>>) -> Arc<AppState> {
        Arc::new(AppState {
            archives,
            jobs: JobStore::start(),
        })
    }
}

/// Opens each directory, keyed by video id.
pub fn load_archives(dirs: &[PathBuf]) -> vidsift_core::Result<BTreeMap<String, Arc<Archive>>> {
    let mut out = BTreeMap::new();
    for dir in dirs {
        let archive = Archive::open(dir)?;
        let id = archive.manifest.video_id.clone();
        if out.insert(id.clone(), Arc::new(archive)).is_some() {
            return Err(Error::Argument(format!("video id {id:?} is served twice")));
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

impl ApiError {
    fn not_found(what: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            error: what.into(),
            path: None,
        }
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            error: msg.into(),
            path: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Query { .. } | Error::Json(_) | Error::Argument(_) => StatusCode::BAD_REQUEST,
            Error::IndexMismatch(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let path = match &e {
            Error::Query { path, .. } => Some(path.clone()),
            _ => None,
        };
        ApiError {
            status,
            error: e.to_string(),
            path,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/archives", get(list_archives))
        .route("/api/archives/{id}", get(archive_info))
        .route("/api/archives/{id}/geometry", get(archive_geometry))
        .route("/api/archives/{id}/frames/{t}", get(archive_frame))
        .route("/api/archives/{id}/queries", post(submit_query))
        .route("/api/jobs/{id}", get(job_status))
        .route("/api/jobs/{id}/results", get(job_results))
        .route("/api/jobs/{id}/matches/{rank}/evidence", get(match_evidence))
        .with_state(state)
}

pub async fn serve(archives: BTreeMap<String, Arc<Archive>>, bind: SocketAddr) -> std::io::Result<()> {
    let app = router(AppState::new(archives));
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn archive(state: &AppState, id: &str) -> ApiResult<Arc<Archive>> {
    state
        .archives
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no archive {id:?}")))
}

fn job(state: &AppState, id: &str) -> ApiResult<JobRecord> {
    state
        .jobs
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("no job {id:?}")))
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ArchiveSummary {
    pub id: String,
    pub feature_set: String,
    pub frames: u64,
    pub documents: u32,
    pub entries: usize,
    pub index_bytes: u64,
}

fn summary(m: &ArchiveManifest) -> ArchiveSummary {
    ArchiveSummary {
        id: m.video_id.clone(),
        feature_set: m.feature_set.to_string(),
        frames: m.frames,
        documents: m.documents,
        entries: m.entries,
        index_bytes: m.index_bytes,
    }
}

async fn list_archives(State(state): State<Arc<AppState>>) -> Json<Vec<ArchiveSummary>> {
    Json(state.archives.values().map(|a| summary(&a.manifest)).collect())
}

async fn archive_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<ArchiveManifest>> {
    Ok(Json(archive(&state, &id)?.manifest.clone()))
}

async fn archive_geometry(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<GridGeometry>> {
    Ok(Json(archive(&state, &id)?.manifest.geometry))
}

async fn archive_frame(
    State(state): State<Arc<AppState>>,
    Path((id, t)): Path<(String, u64)>,
) -> ApiResult<Response> {
    let archive = archive(&state, &id)?;
    if t >= archive.manifest.frames {
        return Err(ApiError::not_found(format!("frame {t} out of range")));
    }
    let png = tokio::task::spawn_blocking(move || -> vidsift_core::Result<Vec<u8>> {
        let frame = archive.frame(t)?;
        let img = image::RgbImage::from_raw(frame.width, frame.height, frame.pixels)
            .ok_or_else(|| Error::Frames("frame buffer size".into()))?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| Error::Frames(e.to_string()))?;
        Ok(out.into_inner())
    })
    .await
    .map_err(|e| ApiError::from(Error::Frames(e.to_string())))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
struct QueryOptions {
    algorithm: Option<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Submitted {
    pub job: String,
    pub state: JobState,
}

async fn submit_query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    UrlQuery(opts): UrlQuery<QueryOptions>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Submitted>)> {
    let archive = archive(&state, &id)?;
    let algorithm: Algorithm = match opts.algorithm.as_deref() {
        None => Algorithm::Dp,
        Some(s) => s.parse()?,
    };
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let query = Query::from_json(text)?;
    query.validate()?;
    compile_query(&query, &archive.index.geometry, archive.index.feature_set)?;
    let params: SearchParams = archive.manifest.config.search.clone();
    let job = state
        .jobs
        .submit(JobRequest {
            archive_id: id,
            archive,
            query,
            algorithm,
            params,
        })
        .await
        .ok_or_else(|| ApiError::from(Error::Argument("job store stopped".into())))?;
    Ok((
        StatusCode::ACCEPTED,
        Json(Submitted {
            job,
            state: JobState::Queued,
        }),
    ))
}

async fn job_status(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<JobRecord>> {
    Ok(Json(job(&state, &id)?))
}

async fn job_results(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = job(&state, &id)?;
    match (record.state, record.result) {
        (JobState::Done, Some(result)) => Ok(Json(result).into_response()),
        (JobState::Failed, _) => Ok((
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                error: record.error.unwrap_or_default(),
                path: None,
            }),
        )
            .into_response()),
        (s, _) => Ok((StatusCode::ACCEPTED, Json(Submitted { job: id, state: s })).into_response()),
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct EvidenceRect {
    pub component: usize,
    pub document: u32,
    pub first_frame: u64,
    pub last_frame: u64,
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<u32>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Evidence {
    pub rank: usize,
    pub score: f64,
    pub start_frame: u64,
    pub end_frame: u64,
    pub rects: Vec<EvidenceRect>,
}

async fn match_evidence(
    State(state): State<Arc<AppState>>,
    Path((id, rank)): Path<(String, usize)>,
) -> ApiResult<Json<Evidence>> {
    let record = job(&state, &id)?;
    let archive = archive(&state, &record.archive)?;
    let result = match (record.state, record.result) {
        (JobState::Done, Some(r)) => r,
        _ => return Err(ApiError::not_found(format!("job {id:?} has no results"))),
    };
    let m = result
        .matches
        .iter()
        .find(|m| m.rank == rank)
        .ok_or_else(|| ApiError::not_found(format!("no match of rank {rank}")))?;
    let g = archive.manifest.geometry;
    let side = g.tree_depth * g.tile_size;
    let rects = m
        .components
        .iter()
        .enumerate()
        .flat_map(|(c, locs)| {
            locs.iter().map(move |l| EvidenceRect {
                component: c,
                document: l.t,
                first_frame: g.first_frame_of(l.t),
                last_frame: g.last_frame_of(l.t),
                x: l.u * g.tile_size,
                y: l.v * g.tile_size,
                width: side,
                height: side,
                track: l.track,
            })
        })
        .collect();
    Ok(Json(Evidence {
        rank: m.rank,
        score: m.score,
        start_frame: m.start_frame,
        end_frame: m.end_frame,
        rects,
    }))
}
