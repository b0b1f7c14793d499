//! HTTP API over a [`Store`].

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::config::RunConfig;
use super::pipeline::{
    execute, latest_run_with_region, layer_csv, layer_geojson, new_manifest, prepare, read_curve, read_curve_csv,
    read_eligibility, whatif_eligibility, PipelineOptions, LAYER_NAMES,
};
use super::store::{sha256_hex, RunManifest, RunStatus, Store};
use crate::eligibility::BufferMap;
use crate::error::Error;
use crate::tech::Tech;
use crate::water::{Case, Rcp};

pub const DEFAULT_PORT: u16 = 8080;

/// Port from `ATLAS_PORT`, else 8080.
pub fn port_from_env() -> u16 {
    std::env::var("ATLAS_PORT")
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

pub struct AppState {
    pub store: Store,
    inflight: Mutex<HashSet<String>>,
    workers: Arc<Semaphore>,
    threads: Option<usize>,
}

impl AppState {
    pub fn new(store: Store, workers: usize, threads: Option<usize>) -> Arc<AppState> {
        Arc::new(AppState {
            store,
            inflight: Mutex::new(HashSet::new()),
            workers: Arc::new(Semaphore::new(workers.max(1))),
            threads,
        })
    }

    pub fn in_flight(&self, run_id: &str) -> bool {
        self.inflight.lock().expect("lock").contains(run_id)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotFound(_) => ApiError::not_found(msg),
            Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_) => ApiError::bad_request(msg),
            Error::Infeasible(_)
            | Error::NoYield
            | Error::RegionBelowResolution(_)
            | Error::NoPreferenceData { .. }
            | Error::MissingScenarioData(_)
            | Error::NoCoastalAccess(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "domain_error", msg),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"status": self.status.as_u16(), "code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Body with a content-derived ETag; answers `If-None-Match` with 304.
fn cached(headers: &HeaderMap, content_type: &'static str, body: Vec<u8>) -> Response {
    let etag = format!("\"{}\"", &sha256_hex(&body)[..32]);
    if headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v == etag)
    {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    let mut resp = (StatusCode::OK, body).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    h.insert(header::ETAG, HeaderValue::from_str(&etag).expect("ascii etag"));
    resp
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable")
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn list_runs(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<RunManifest>>> {
    let store = st.store.clone();
    Ok(Json(blocking(move || store.list_runs()).await?))
}

async fn get_run(State(st): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let store = st.store.clone();
    let m = blocking(move || store.read_manifest(&id)).await?;
    if matches!(m.status, RunStatus::Done | RunStatus::Failed) {
        Ok(cached(&headers, "application/json", json_bytes(&m)))
    } else {
        Ok(Json(m).into_response())
    }
}

async fn post_run(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body must be UTF-8 JSON"))?;
    let config = RunConfig::from_json(text)?;
    let (run_id, digests) = {
        let c = config.clone();
        blocking(move || {
            prepare(&c).map_err(|e| match e {
                Error::File { path, source } => Error::Config(format!("{}: {source}", path.display())),
                Error::NotFound(m) => Error::Config(m),
                other => other,
            })
        })
        .await?
    };
    if let Ok(m) = st.store.read_manifest(&run_id) {
        if m.status == RunStatus::Done {
            return Ok((StatusCode::OK, Json(m)).into_response());
        }
    }
    {
        let mut inflight = st.inflight.lock().expect("lock");
        if !inflight.insert(run_id.clone()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("run {run_id} is already in flight"),
            ));
        }
    }
    let manifest = new_manifest(&config, &run_id, digests);
    if let Err(e) = st.store.write_manifest(&manifest) {
        st.inflight.lock().expect("lock").remove(&run_id);
        return Err(e.into());
    }
    let state = st.clone();
    let response = manifest.clone();
    tokio::spawn(async move {
        let permit = state.workers.clone().acquire_owned().await;
        let s2 = state.clone();
        let id = manifest.run_id.clone();
        let res = tokio::task::spawn_blocking(move || {
            let mut m = manifest;
            execute(&s2.store, &config, &mut m, PipelineOptions { threads: s2.threads })
        })
        .await;
        if let Ok(Err(e)) | Err(e) = res.map_err(|e| Error::Solver(e.to_string())) {
            log::error!("run {id} failed: {e}");
        }
        drop(permit);
        state.inflight.lock().expect("lock").remove(&id);
    });
    Ok((StatusCode::ACCEPTED, Json(response)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerQuery {
    run: Option<String>,
    year: Option<u16>,
    rcp: Option<String>,
    case: Option<String>,
    format: Option<String>,
}

fn select_run(store: &Store, q: &LayerQuery) -> Result<RunManifest, Error> {
    let rcp: Option<Rcp> = q.rcp.as_deref().map(str::parse).transpose()?;
    let case: Option<Case> = q.case.as_deref().map(str::parse).transpose()?;
    let matches = |m: &RunManifest| {
        q.year.is_none_or(|y| y == m.scenario.year)
            && rcp.is_none_or(|r| r == m.scenario.rcp)
            && case.is_none_or(|c| c == m.scenario.case)
    };
    match &q.run {
        Some(id) => {
            let m = store.read_manifest(id)?;
            if !matches(&m) {
                return Err(Error::NotFound(format!("run {id} does not hold the requested scenario")));
            }
            if m.status != RunStatus::Done {
                return Err(Error::NotFound(format!("run {id} has no layers yet")));
            }
            Ok(m)
        }
        None => store
            .list_runs()?
            .into_iter()
            .rev()
            .find(|m| m.status == RunStatus::Done && matches(m))
            .ok_or_else(|| Error::NotFound("no finished run for the requested scenario".into())),
    }
}

async fn get_layer(
    State(st): State<Arc<AppState>>,
    Path(name): Path<String>,
    Query(q): Query<LayerQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    if !LAYER_NAMES.contains(&name.as_str()) {
        return Err(ApiError::not_found(format!("unknown layer {name}")));
    }
    let store = st.store.clone();
    let csv = match q.format.as_deref() {
        None | Some("geojson") => false,
        Some("csv") => true,
        Some(f) => return Err(ApiError::bad_request(format!("unknown format {f}"))),
    };
    let body = blocking(move || {
        let m = select_run(&store, &q)?;
        if csv {
            Ok(layer_csv(&store, &m.run_id, &name)?.into_bytes())
        } else {
            Ok(json_bytes(&layer_geojson(&store, &m.run_id, &name)?))
        }
    })
    .await?;
    Ok(cached(&headers, if csv { "text/csv" } else { "application/geo+json" }, body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveQuery {
    run: Option<String>,
    format: Option<String>,
}

fn run_for_region(store: &Store, run: Option<&str>, gid: &str) -> Result<RunManifest, Error> {
    match run {
        Some(id) => {
            let m = store.read_manifest(id)?;
            if m.status != RunStatus::Done || m.region(gid).is_none() {
                return Err(Error::NotFound(format!("region {gid} in run {id}")));
            }
            Ok(m)
        }
        None => latest_run_with_region(store, gid),
    }
}

async fn get_curve(
    State(st): State<Arc<AppState>>,
    Path(gid): Path<String>,
    Query(q): Query<CurveQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let store = st.store.clone();
    let csv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(f) => return Err(ApiError::bad_request(format!("unknown format {f}"))),
    };
    let body = blocking(move || {
        let m = run_for_region(&store, q.run.as_deref(), &gid)?;
        if csv {
            Ok(read_curve_csv(&store, &m.run_id, &gid)?.into_bytes())
        } else {
            let curve = read_curve(&store, &m.run_id, &gid)?;
            Ok(json_bytes(&json!({"run_id": m.run_id, "curve": curve})))
        }
    })
    .await?;
    Ok(cached(&headers, if csv { "text/csv" } else { "application/json" }, body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EligibilityQuery {
    tech: Option<String>,
    run: Option<String>,
}

fn parse_tech(s: Option<&str>) -> Result<Tech, ApiError> {
    match s {
        None => Ok(Tech::Wind),
        Some(t) => t.parse().map_err(|_| ApiError::bad_request(format!("unknown tech {t:?}"))),
    }
}

async fn get_eligibility(
    State(st): State<Arc<AppState>>,
    Path(gid): Path<String>,
    Query(q): Query<EligibilityQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let tech = parse_tech(q.tech.as_deref())?;
    let store = st.store.clone();
    let body = blocking(move || {
        let m = run_for_region(&store, q.run.as_deref(), &gid)?;
        let r = read_eligibility(&store, &m.run_id, &gid, tech)?;
        Ok(json_bytes(&json!({
            "run_id": m.run_id,
            "gid": gid,
            "tech": tech,
            "eligible_fraction": r.eligible_fraction,
            "region_cells": r.region_cells,
            "eligible_cells": r.eligible_cells,
            "ledger": r.ledger,
            "grid": format!("runs/{}/regions/{}/eligibility_{}.asc", m.run_id, gid, tech),
        })))
    })
    .await?;
    Ok(cached(&headers, "application/json", body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatifBody {
    #[serde(default)]
    tech: Option<String>,
    #[serde(default)]
    run: Option<String>,
    /// Criterion id to buffer in meters.
    #[serde(default)]
    overrides: BTreeMap<u8, f64>,
}

async fn post_whatif(
    State(st): State<Arc<AppState>>,
    Path(gid): Path<String>,
    Query(q): Query<EligibilityQuery>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let b: WhatifBody = if body.is_empty() {
        WhatifBody {
            tech: None,
            run: None,
            overrides: BTreeMap::new(),
        }
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let tech = parse_tech(b.tech.as_deref().or(q.tech.as_deref()))?;
    let run = b.run.or(q.run);
    let store = st.store.clone();
    let overrides: BufferMap = b.overrides;
    let out = blocking(move || {
        let m = run_for_region(&store, run.as_deref(), &gid)?;
        let baseline = read_eligibility(&store, &m.run_id, &gid, tech)?;
        let r = whatif_eligibility(&store, &m.run_id, &gid, tech, &overrides)?;
        Ok(json!({
            "run_id": m.run_id,
            "gid": gid,
            "tech": tech,
            "overrides": overrides,
            "eligible_fraction": r.eligible_fraction,
            "region_cells": r.region_cells,
            "eligible_cells": r.eligible_cells,
            "ledger": r.ledger,
            "baseline_fraction": baseline.eligible_fraction,
            "delta": r.eligible_fraction - baseline.eligible_fraction,
        }))
    })
    .await?;
    Ok(Json(out))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/runs", get(list_runs).post(post_run))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/layers/{name}", get(get_layer))
        .route("/api/regions/{gid}/cost-potential", get(get_curve))
        .route("/api/regions/{gid}/eligibility", get(get_eligibility))
        .route("/api/regions/{gid}/eligibility:whatif", post(post_whatif))
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
