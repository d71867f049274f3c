use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::body::Body;
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ballotmap_core::analytics::{
    candidate_trend, election_summary, party_metric_series, party_totals, predict, winner_heatmap, AnalyticsError,
    Metric, PartySeries, PartySummary, PartyTotal, WinnerMatrix,
};
use ballotmap_core::geometry::{simplify, RegionFeature};
use ballotmap_core::join::merge_results_with_geometry;
use ballotmap_core::render::{assign_party_colors, render_map};
use ballotmap_core::{ElectionType, RegionLevel, TrendModel};
use serde::Serialize;
use tokio::sync::Mutex;
use tracing::{error, info};

use crate::{ServiceConfig, Snapshot};

pub const DEFAULT_MAP_WIDTH: u32 = 960;
pub const DEFAULT_MAP_HEIGHT: u32 = 600;
pub const MAX_MAP_SIZE: u32 = 8192;

#[derive(Clone)]
pub struct AppState {
    snapshot: Arc<ArcSwap<Snapshot>>,
    config: Option<Arc<ServiceConfig>>,
    next_version: Arc<AtomicU64>,
    reload_lock: Arc<Mutex<()>>,
}

impl AppState {
    /// State serving `snapshot`. Without a config, reload is refused.
    pub fn new(snapshot: Snapshot, config: Option<ServiceConfig>) -> Self {
        let next = snapshot.version + 1;
        AppState {
            snapshot: Arc::new(ArcSwap::from_pointee(snapshot)),
            config: config.map(Arc::new),
            next_version: Arc::new(AtomicU64::new(next)),
            reload_lock: Arc::new(Mutex::new(())),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }

    /// Rebuilds the snapshot from the config and swaps it in. On failure the
    /// current snapshot stays.
    pub async fn reload(&self) -> Result<u64, ApiError> {
        let Some(config) = self.config.clone() else {
            return Err(ApiError::ReloadFailed("no configuration to reload from".into()));
        };
        let _guard = self.reload_lock.lock().await;
        let version = self.next_version.fetch_add(1, Ordering::SeqCst);
        let snap = tokio::task::spawn_blocking(move || Snapshot::load(&config, version))
            .await
            .map_err(|e| ApiError::ReloadFailed(e.to_string()))?
            .map_err(|e| ApiError::ReloadFailed(e.to_string()))?;
        self.snapshot.store(Arc::new(snap));
        info!(version, "snapshot swapped");
        Ok(version)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    BadRequest(String),
    NotFound(Option<String>),
    Unprocessable(String),
    ReloadFailed(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, detail) = match &self {
            ApiError::BadRequest(d) => (StatusCode::BAD_REQUEST, "bad_request", Some(d.as_str())),
            ApiError::NotFound(d) => (StatusCode::NOT_FOUND, "not_found", d.as_deref()),
            ApiError::Unprocessable(d) => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", Some(d.as_str())),
            ApiError::ReloadFailed(d) => (StatusCode::SERVICE_UNAVAILABLE, "reload_failed", Some(d.as_str())),
            ApiError::Internal(d) => {
                error!(detail = d, "internal error");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", None)
            }
        };
        let body = serde_json::to_vec(&ErrorBody { error: code, detail }).expect("plain data");
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        ApiError::Unprocessable(e.to_string())
    }
}

type ApiResult = Result<Response, ApiError>;

fn versioned(version: u64, content_type: &'static str, body: Vec<u8>) -> Response {
    let mut res = (StatusCode::OK, body).into_response();
    let h = res.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    h.insert(header::ETAG, HeaderValue::from_str(&format!("\"v{version}\"")).expect("ascii"));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    h.insert("x-snapshot-version", HeaderValue::from(version));
    res
}

fn json(version: u64, body: &impl Serialize) -> Response {
    versioned(version, "application/json", serde_json::to_vec(body).expect("plain data"))
}

fn query_map(raw: Option<String>) -> BTreeMap<String, String> {
    form_urlencoded::parse(raw.unwrap_or_default().as_bytes()).into_owned().collect()
}

fn election_type_param(value: Option<&String>) -> Result<ElectionType, ApiError> {
    let v = value.ok_or_else(|| ApiError::BadRequest("missing query parameter: type".into()))?;
    v.parse().map_err(|_| ApiError::BadRequest(format!("type must be federal or provincial, got {v:?}")))
}

fn path_election_type(v: &str) -> Result<ElectionType, ApiError> {
    v.parse().map_err(|_| ApiError::BadRequest(format!("unknown election type {v:?}")))
}

fn path_year(v: &str) -> Result<i32, ApiError> {
    v.parse().map_err(|_| ApiError::BadRequest(format!("year must be an integer, got {v:?}")))
}

fn number_param<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| v.parse::<T>().map_err(|_| ApiError::BadRequest(format!("{key} is not a valid number: {v:?}"))))
        .transpose()
}

#[derive(Serialize)]
struct ElectionListing {
    election_type: ElectionType,
    year: i32,
    region_level: RegionLevel,
    file: String,
    row_count: usize,
}

async fn list_elections(State(state): State<AppState>) -> ApiResult {
    let snap = state.snapshot();
    let listing: Vec<ElectionListing> = snap
        .catalog
        .entries()
        .iter()
        .map(|e| ElectionListing {
            election_type: e.election_type,
            year: e.year,
            region_level: e.region_level,
            file: e.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            row_count: e.row_count,
        })
        .collect();
    Ok(json(snap.version, &listing))
}

#[derive(Serialize)]
struct ResultsBody {
    election_type: ElectionType,
    year: i32,
    region_level: RegionLevel,
    summary: Vec<PartySummary>,
}

async fn election_results(State(state): State<AppState>, Path((ty, year)): Path<(String, String)>) -> ApiResult {
    let (ty, year) = (path_election_type(&ty)?, path_year(&year)?);
    let snap = state.snapshot();
    let entry = snap.catalog.primary(ty, year).ok_or(ApiError::NotFound(None))?;
    Ok(json(
        snap.version,
        &ResultsBody { election_type: ty, year, region_level: entry.region_level, summary: election_summary(&entry.rows) },
    ))
}

/// Joins one election to its level's geometry and renders it; regions
/// without results are drawn grey.
fn render_election(
    snap: &Snapshot,
    ty: ElectionType,
    year: i32,
    retain: f64,
    width: u32,
    height: u32,
) -> Result<String, ApiError> {
    let entry = snap.catalog.primary(ty, year).ok_or(ApiError::NotFound(None))?;
    let geometry = snap
        .geometry
        .get(&entry.region_level)
        .ok_or_else(|| ApiError::NotFound(Some(format!("no {} geometry configured", entry.region_level))))?;
    let simplified;
    let fs = if retain < 1.0 {
        simplified = simplify(geometry, retain).map_err(|e| ApiError::Internal(e.to_string()))?;
        &simplified
    } else {
        geometry
    };
    let (joined, report) =
        merge_results_with_geometry(&entry.rows, fs, false).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    if joined.is_empty() {
        return Err(ApiError::Unprocessable("no region of this election matches the geometry".into()));
    }
    let unmatched: Vec<RegionFeature<f64>> =
        report.unmatched_geometry_ids.iter().filter_map(|id| fs.get(*id).cloned()).collect();
    let parties: Vec<&str> = joined.iter().map(|j| j.winner_party.as_str()).collect();
    let palette = assign_party_colors(&parties, &snap.overrides).map_err(|e| ApiError::Internal(e.to_string()))?;
    render_map(&joined, &unmatched, &palette, width, height).map_err(|e| ApiError::Internal(e.to_string()))
}

async fn election_map(
    State(state): State<AppState>,
    Path((ty, file)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let year = file.strip_suffix(".svg").ok_or(ApiError::NotFound(None))?;
    let (ty, year) = (path_election_type(&ty)?, path_year(year)?);
    let q = query_map(raw);
    let retain = number_param::<f64>(&q, "retain")?.unwrap_or(1.0);
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(ApiError::BadRequest(format!("retain must be in (0, 1], got {retain}")));
    }
    let width = number_param::<u32>(&q, "w")?.unwrap_or(DEFAULT_MAP_WIDTH);
    let height = number_param::<u32>(&q, "h")?.unwrap_or(DEFAULT_MAP_HEIGHT);
    if !(64..=MAX_MAP_SIZE).contains(&width) || !(64..=MAX_MAP_SIZE).contains(&height) {
        return Err(ApiError::BadRequest(format!("w and h must be within 64..={MAX_MAP_SIZE}")));
    }

    let snap = state.snapshot();
    let version = snap.version;
    let svg = tokio::task::spawn_blocking(move || render_election(&snap, ty, year, retain, width, height))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(versioned(version, "image/svg+xml", svg.into_bytes()))
}

#[derive(Serialize)]
struct TrendBody {
    election_type: ElectionType,
    series: Vec<(i32, f64)>,
    estimated: Vec<i32>,
    model: TrendModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<PredictionBody>,
}

#[derive(Serialize)]
struct PredictionBody {
    year: f64,
    value: f64,
}

async fn candidates_trend(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult {
    let q = query_map(raw);
    let ty = election_type_param(q.get("type"))?;
    let at = number_param::<f64>(&q, "predict")?;
    if at.is_some_and(|x| !x.is_finite()) {
        return Err(ApiError::BadRequest("predict must be finite".into()));
    }
    let snap = state.snapshot();
    let trend = candidate_trend(&snap.catalog, ty)?;
    let prediction = at.map(|year| PredictionBody { year, value: predict(&trend.model, year) });
    Ok(json(
        snap.version,
        &TrendBody { election_type: ty, series: trend.series, estimated: trend.estimated, model: trend.model, prediction },
    ))
}

#[derive(Serialize)]
struct HeatmapBody {
    election_type: ElectionType,
    #[serde(flatten)]
    matrix: WinnerMatrix,
}

async fn heatmap(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult {
    let ty = election_type_param(query_map(raw).get("type"))?;
    let snap = state.snapshot();
    let matrix = winner_heatmap(&snap.catalog, ty)?;
    Ok(json(snap.version, &HeatmapBody { election_type: ty, matrix }))
}

#[derive(Serialize)]
struct SeriesBody {
    election_type: ElectionType,
    metric: Metric,
    series: Vec<PartySeries>,
}

async fn series(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult {
    let q = query_map(raw);
    let ty = election_type_param(q.get("type"))?;
    let metric = match q.get("metric") {
        Some(m) => m.parse().map_err(|e: ballotmap_core::analytics::UnknownMetric| ApiError::BadRequest(e.to_string()))?,
        None => Metric::SeatsWon,
    };
    let snap = state.snapshot();
    let series = party_metric_series(&snap.catalog, ty, metric)?;
    Ok(json(snap.version, &SeriesBody { election_type: ty, metric, series }))
}

#[derive(Serialize)]
struct TotalsBody {
    election_type: ElectionType,
    totals: Vec<PartyTotal>,
}

async fn totals(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult {
    let ty = election_type_param(query_map(raw).get("type"))?;
    let snap = state.snapshot();
    Ok(json(snap.version, &TotalsBody { election_type: ty, totals: party_totals(&snap.catalog, ty) }))
}

#[derive(Serialize)]
struct ReloadBody {
    version: u64,
    elections: usize,
}

async fn reload(State(state): State<AppState>) -> ApiResult {
    let version = state.reload().await?;
    let snap = state.snapshot();
    Ok(json(snap.version, &ReloadBody { version, elections: snap.catalog.len() }))
}

async fn not_found() -> ApiError {
    ApiError::NotFound(None)
}

/// CORS for the browser UI and conditional GETs against the snapshot ETag.
async fn common_headers(req: Request, next: Next) -> Response {
    let if_none_match = req.headers().get(header::IF_NONE_MATCH).cloned();
    let mut res = next.run(req).await;
    if res.status() == StatusCode::OK {
        if let (Some(tag), Some(inm)) = (res.headers().get(header::ETAG), if_none_match) {
            if inm.as_bytes().split(|b| *b == b',').any(|t| t.trim_ascii() == tag.as_bytes() || t.trim_ascii() == b"*") {
                let mut nm = Response::new(Body::empty());
                *nm.status_mut() = StatusCode::NOT_MODIFIED;
                for key in [header::ETAG, header::CACHE_CONTROL] {
                    if let Some(v) = res.headers().get(&key) {
                        nm.headers_mut().insert(key, v.clone());
                    }
                }
                res = nm;
            }
        }
    }
    res.headers_mut().insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    res
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/elections", get(list_elections))
        .route("/api/elections/{type}/{year}/results", get(election_results))
        .route("/api/maps/{type}/{file}", get(election_map))
        .route("/api/analytics/candidates/trend", get(candidates_trend))
        .route("/api/analytics/heatmap", get(heatmap))
        .route("/api/analytics/series", get(series))
        .route("/api/analytics/totals", get(totals))
        .route("/api/reload", post(reload))
        .fallback(not_found)
        .layer(middleware::from_fn(common_headers))
        .with_state(state)
}
