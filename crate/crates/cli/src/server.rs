//! Curation service under `/api/v1`.
//!
//! A session directory holds `session.json` (a [`SessionBundle`]),
//! `labels.json`, `frames/<video_id>.wfrm` and optionally `predictions.json`.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use touchgrid::ingest::{compose_lag, FrameStack};
use touchgrid::labels::{Label, LabelFile, VideoLabels};

use crate::artifacts::SessionBundle;
use crate::error::{CliError, CliResult};

pub struct AppState {
    dir: PathBuf,
    bundle: SessionBundle,
    labels: Mutex<LabelState>,
}

struct LabelState {
    version: u64,
    file: LabelFile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsBody {
    /// Version the client last saw; informational, the last writer wins.
    #[serde(default)]
    pub version: Option<u64>,
    pub labels: LabelFile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionBody {
    pub session: touchgrid::labels::SessionManifest,
    pub frames: Vec<touchgrid::select::SampledFrame>,
    pub labels_version: u64,
    pub has_predictions: bool,
}

#[derive(Debug, Serialize)]
struct ApiError {
    error: String,
    message: String,
}

fn api_error(status: StatusCode, kind: &str, message: impl Into<String>) -> Response {
    (status, Json(ApiError { error: kind.into(), message: message.into() })).into_response()
}

fn core_error(e: touchgrid::Error) -> Response {
    let status = match e {
        touchgrid::Error::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
        touchgrid::Error::FrameIndex { .. } => StatusCode::NOT_FOUND,
        touchgrid::Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    api_error(status, e.kind(), e.to_string())
}

impl AppState {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let bundle = SessionBundle::read(&dir.join("session.json"))?;
        let labels_path = dir.join("labels.json");
        let file = if labels_path.exists() {
            LabelFile::read(&labels_path)?
        } else {
            LabelFile {
                session_id: bundle.session.session_id.clone(),
                frame_rate_hz: bundle.session.frame_rate_hz,
                videos: bundle
                    .session
                    .videos
                    .iter()
                    .map(|v| VideoLabels {
                        video_id: v.video_id.clone(),
                        labels: vec![Label::Unlabeled; v.n_frames],
                        pole_in_reach: vec![true; v.n_frames],
                    })
                    .collect(),
            }
        };
        Ok(Self { dir: dir.to_path_buf(), bundle, labels: Mutex::new(LabelState { version: 0, file }) })
    }

    fn labels_path(&self) -> PathBuf {
        self.dir.join("labels.json")
    }

    /// Checks a submitted label file against the session manifest.
    fn check_labels(&self, file: &LabelFile) -> Result<(), String> {
        file.validate().map_err(|e| e.to_string())?;
        if file.session_id != self.bundle.session.session_id {
            return Err(format!("session_id {:?} does not match {:?}", file.session_id, self.bundle.session.session_id));
        }
        for v in &file.videos {
            let Some(m) = self.bundle.session.videos.iter().find(|m| m.video_id == v.video_id) else {
                return Err(format!("unknown video {:?}", v.video_id));
            };
            if v.labels.len() != m.n_frames {
                return Err(format!("video {:?}: {} labels for {} frames", v.video_id, v.labels.len(), m.n_frames));
            }
        }
        Ok(())
    }
}

async fn get_session(State(st): State<Arc<AppState>>) -> Response {
    let version = st.labels.lock().await.version;
    Json(SessionBody {
        session: st.bundle.session.clone(),
        frames: st.bundle.frames.clone(),
        labels_version: version,
        has_predictions: st.dir.join("predictions.json").exists(),
    })
    .into_response()
}

fn encode_png(width: usize, height: usize, pixels: Vec<u8>) -> Result<Vec<u8>, String> {
    let img = image::RgbImage::from_raw(width as u32, height as u32, pixels).ok_or("pixel buffer size mismatch")?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

async fn get_frame(State(st): State<Arc<AppState>>, UrlPath((video_id, file)): UrlPath<(String, String)>) -> Response {
    let Some(idx) = file.strip_suffix(".png").and_then(|s| s.parse::<usize>().ok()) else {
        return api_error(StatusCode::NOT_FOUND, "NotFound", format!("{file} is not <frame_idx>.png"));
    };
    // Only manifest videos map to files, which keeps ids out of path traversal.
    if !st.bundle.session.videos.iter().any(|v| v.video_id == video_id) {
        return api_error(StatusCode::NOT_FOUND, "NotFound", format!("unknown video {video_id}"));
    }
    let path = st.dir.join("frames").join(format!("{video_id}.wfrm"));
    let result = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, Response> {
        let stack = FrameStack::read(&path).map_err(core_error)?;
        let img = compose_lag(&stack, idx).map_err(core_error)?;
        encode_png(img.width, img.height, img.pixels)
            .map_err(|e| api_error(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", e))
    })
    .await;
    match result {
        Ok(Ok(png)) => ([(header::CONTENT_TYPE, "image/png")], png).into_response(),
        Ok(Err(resp)) => resp,
        Err(e) => api_error(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", e.to_string()),
    }
}

async fn get_labels(State(st): State<Arc<AppState>>) -> Response {
    let guard = st.labels.lock().await;
    Json(LabelsBody { version: Some(guard.version), labels: guard.file.clone() }).into_response()
}

async fn put_labels(State(st): State<Arc<AppState>>, body: Result<Json<LabelsBody>, axum::extract::rejection::JsonRejection>) -> Response {
    let body = match body {
        Ok(Json(b)) => b,
        Err(e) => return api_error(StatusCode::BAD_REQUEST, "FormatError", e.body_text()),
    };
    if let Err(msg) = st.check_labels(&body.labels) {
        return api_error(StatusCode::UNPROCESSABLE_ENTITY, "LabelError", msg);
    }
    // Holding the lock across the write serializes writers.
    let mut guard = st.labels.lock().await;
    if let Err(e) = body.labels.write_atomic(&st.labels_path()) {
        return core_error(e);
    }
    guard.version += 1;
    guard.file = body.labels;
    Json(serde_json::json!({ "version": guard.version })).into_response()
}

async fn get_predictions(State(st): State<Arc<AppState>>) -> Response {
    match tokio::fs::read(st.dir.join("predictions.json")).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            api_error(StatusCode::NOT_FOUND, "NotFound", "no predictions for this session")
        }
        Err(e) => api_error(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/session", get(get_session))
        .route("/api/v1/frame/{video_id}/{file}", get(get_frame))
        .route("/api/v1/labels", get(get_labels).put(put_labels))
        .route("/api/v1/predictions", get(get_predictions))
        .with_state(state)
}

pub fn serve(dir: &Path, bind: &str, port: u16) -> CliResult<()> {
    let state = Arc::new(AppState::load(dir)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((bind, port)).await?;
        log::info!("serving {} on {}", dir.display(), listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
