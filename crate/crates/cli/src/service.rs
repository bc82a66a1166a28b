//! HTTP/JSON API used by the region studio.
//!
//! | method | path                    | body / query                          |
//! |--------|-------------------------|---------------------------------------|
//! | POST   | `/api/images`           | raw PNG, PPM or `.f64` bytes          |
//! | GET    | `/api/images/{id}`      | metadata; `{id}.png` renders sRGB     |
//! | POST   | `/api/estimate`         | `{"id", "rect", "method"?}`           |
//! | POST   | `/api/correct`          | `{"id", "epsilon": [e1, e2, e3]}`     |
//! | POST   | `/api/diagnose`         | `{"id", "regions": [{name, rect}]}`   |
//! | GET    | `/api/scatter`          | `id`, `rect`?, `stride`?              |
//! | GET    | `/api/convert`          | `id`, `space`, `channel`?, `histeq`?, `invert`? |
//!
//! Errors are `{"error": code, "detail": text}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::UNIX_EPOCH;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use orgb_core::color::{convert, display_channel, ColorSpace};
use orgb_core::image::io::{decode_image, encode_float, encode_png_gray, encode_png_rgb};
use orgb_core::image::{histogram_equalize, invert, BitDepth, DEFAULT_HISTEQ_BINS};
use orgb_core::offset::{estimate_epsilon_with, Method};
use orgb_core::{correct, make_mask_rect, LinearImage, Offset, Rect, RegionMask};

use crate::report::{diagnose, NamedRegion};
use crate::store::{content_id, SessionStore};

pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;
pub const MAX_SCATTER_POINTS: usize = 20_000;

#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<SessionStore>>,
}

impl AppState {
    pub fn new(max_images: usize) -> Self {
        Self {
            store: Arc::new(RwLock::new(SessionStore::new(max_images))),
        }
    }

    fn image(&self, id: &str) -> Result<Arc<LinearImage>, ApiError> {
        self.store
            .read()
            .expect("store lock poisoned")
            .image(id)
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn insert(&self, id: &str, image: LinearImage, name: Option<String>) {
        self.store
            .write()
            .expect("store lock poisoned")
            .insert(id.to_string(), image, name);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no image with id {id}"))
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", detail)
    }
}

impl From<orgb_core::Error> for ApiError {
    fn from(e: orgb_core::Error) -> Self {
        use orgb_core::Error as E;
        let status = match e {
            E::Format(_) | E::Json(_) => StatusCode::BAD_REQUEST,
            E::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs CPU-heavy work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn region_mask(img: &LinearImage, rect: Option<Rect>) -> ApiResult<RegionMask> {
    let (w, h) = img.dims();
    Ok(match rect {
        Some(r) => make_mask_rect(r, w, h)?,
        None => RegionMask::full(w, h),
    })
}

/// Rectangles arrive either as `{"x","y","w","h"}` or `"x,y,w,h"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RectArg {
    Object(Rect),
    Text(String),
}

impl RectArg {
    fn parse(self) -> ApiResult<Rect> {
        match self {
            RectArg::Object(r) => Ok(r),
            RectArg::Text(s) => s.parse().map_err(ApiError::from),
        }
    }
}

fn parse_rect_query(rect: Option<&str>) -> ApiResult<Option<Rect>> {
    rect.filter(|s| !s.is_empty())
        .map(|s| s.parse::<Rect>().map_err(ApiError::from))
        .transpose()
}

#[derive(Serialize)]
struct ImageInfo {
    id: String,
    width: usize,
    height: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    created: Option<u64>,
}

async fn upload(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    if body.is_empty() {
        return Err(ApiError::bad_request("empty upload"));
    }
    let name = headers
        .get("x-filename")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let (id, image) = blocking(move || Ok((content_id(&body), decode_image(&body)?))).await?;
    let (width, height) = image.dims();
    log::info!("stored image {id} ({width}x{height})");
    state.insert(&id, image, name);
    Ok((
        StatusCode::CREATED,
        Json(ImageInfo {
            id,
            width,
            height,
            name: None,
            created: None,
        }),
    )
        .into_response())
}

async fn image_resource(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    if let Some(id) = id.strip_suffix(".png") {
        let img = state.image(id)?;
        let bytes = blocking(move || Ok(encode_png_rgb(&img, BitDepth::Eight)?)).await?;
        return Ok(png(bytes));
    }
    let store = state.store.read().expect("store lock poisoned");
    let entry = store.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let (width, height) = entry.image.dims();
    Ok(Json(ImageInfo {
        id: id.clone(),
        width,
        height,
        name: entry.name.clone(),
        created: entry.created.duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
    })
    .into_response())
}

#[derive(Deserialize)]
struct EstimateRequest {
    id: String,
    rect: RectArg,
    #[serde(default)]
    method: Method,
}

async fn estimate(
    State(state): State<AppState>,
    req: Result<Json<EstimateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = req?;
    let img = state.image(&req.id)?;
    let rect = req.rect.parse()?;
    let eps = blocking(move || {
        let mask = region_mask(&img, Some(rect))?;
        Ok(estimate_epsilon_with(&img, &mask, req.method)?)
    })
    .await?;
    Ok(Json(eps).into_response())
}

#[derive(Deserialize)]
struct CorrectRequest {
    id: String,
    epsilon: [f64; 3],
}

async fn correct_image(
    State(state): State<AppState>,
    req: Result<Json<CorrectRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = req?;
    let offset = Offset::new(req.epsilon)?;
    let digest = offset.digest();
    let cached = state
        .store
        .read()
        .expect("store lock poisoned")
        .corrected_id(&req.id, &digest);
    let id = match cached {
        Some(id) => id,
        None => {
            let img = state.image(&req.id)?;
            let (id, corrected) = blocking(move || {
                let corrected = correct(&img, &offset);
                Ok((content_id(&encode_float(&corrected)), corrected))
            })
            .await?;
            let mut store = state.store.write().expect("store lock poisoned");
            store.insert(id.clone(), corrected, None);
            store.remember_corrected(&req.id, &digest, &id);
            id
        }
    };
    let (width, height) = state.image(&id)?.dims();
    Ok(Json(json!({"id": id, "width": width, "height": height, "epsilon": req.epsilon})).into_response())
}

#[derive(Deserialize)]
struct DiagnoseRequest {
    id: String,
    regions: Vec<NamedRegion>,
}

async fn diagnose_image(
    State(state): State<AppState>,
    req: Result<Json<DiagnoseRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = req?;
    let img = state.image(&req.id)?;
    let report = blocking(move || Ok(diagnose(&img, &req.regions)?)).await?;
    Ok(Json(report).into_response())
}

#[derive(Deserialize)]
struct ScatterQuery {
    id: String,
    rect: Option<String>,
    stride: Option<usize>,
}

async fn scatter(
    State(state): State<AppState>,
    query: Result<Query<ScatterQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let img = state.image(&q.id)?;
    let rect = parse_rect_query(q.rect.as_deref())?;
    let requested = q.stride.unwrap_or(1);
    if requested == 0 {
        return Err(ApiError::bad_request("stride must be >= 1"));
    }
    let mask = region_mask(&img, rect)?;
    let total = mask.count();
    // widen the stride when the requested one would exceed the point cap
    let stride = requested.max(total.div_ceil(MAX_SCATTER_POINTS));
    let points: Vec<[f64; 3]> = mask.indices().step_by(stride).map(|i| img.pixel_at(i)).collect();
    Ok(Json(json!({"points": points, "stride": stride, "total": total})).into_response())
}

#[derive(Deserialize)]
struct ConvertQuery {
    id: String,
    space: String,
    channel: Option<String>,
    #[serde(default)]
    histeq: bool,
    #[serde(default)]
    invert: bool,
}

async fn convert_image(
    State(state): State<AppState>,
    query: Result<Query<ConvertQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let space: ColorSpace = q.space.parse()?;
    let img = state.image(&q.id)?;
    let bytes = blocking(move || {
        let name = q.channel.as_deref().unwrap_or(space.channel_names()[0]);
        let set = convert(&img, space);
        let ch = set.channel(name).ok_or_else(|| {
            ApiError::bad_request(format!(
                "space {space:?} has no channel {name:?}; channels: {}",
                space.channel_names().join(", ")
            ))
        })?;
        let mut out = display_channel(space, name, ch);
        if q.histeq {
            out = histogram_equalize(&out, DEFAULT_HISTEQ_BINS)?;
        }
        if q.invert {
            out = invert(&out);
        }
        Ok(encode_png_gray(&out, BitDepth::Eight)?)
    })
    .await?;
    Ok(png(bytes))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint")
}

/// The API router; static files under `root` are served for every other
/// path when given.
pub fn router(state: AppState, root: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/images", post(upload))
        .route("/api/images/{id}", get(image_resource))
        .route("/api/estimate", post(estimate))
        .route("/api/correct", post(correct_image))
        .route("/api/diagnose", post(diagnose_image))
        .route("/api/scatter", get(scatter))
        .route("/api/convert", get(convert_image))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state);
    match root {
        Some(root) => api.fallback_service(ServeDir::new(root)),
        None => api.fallback(api_not_found),
    }
}

/// Serves until ctrl-c.
pub async fn serve(port: u16, root: Option<PathBuf>, max_images: usize) -> anyhow::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(max_images), root))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
