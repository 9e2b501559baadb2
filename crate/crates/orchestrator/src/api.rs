// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! HTTP+JSON self-ordering API. Field names are documented in `api.md`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nslice_core::lifecycle::{ExposureError, LifecycleError};
use nslice_core::ordering::{OrderError, OverrideValue};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::warn;

use crate::engine::{Engine, EngineError};
use crate::tenants::TenantRegistry;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Mutex<Engine>>,
    pub tenants: Arc<TenantRegistry>,
    pub async_process: bool,
}

impl AppState {
    pub fn new(engine: Engine, tenants: TenantRegistry) -> Self {
        let async_process = engine.config().async_process;
        AppState { engine: Arc::new(Mutex::new(engine)), tenants: Arc::new(tenants), async_process }
    }

    fn engine(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, error, message: message.into(), field: None }
    }

    fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid tenant token")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn order_error(e: &OrderError) -> ApiError {
    let status = match e {
        OrderError::UnknownTemplate(_) => StatusCode::NOT_FOUND,
        OrderError::ForbiddenAttribute { .. } | OrderError::OutOfRange { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        OrderError::IllegalTransition { .. } => StatusCode::CONFLICT,
    };
    let code = match e {
        OrderError::UnknownTemplate(_) => "not_found",
        OrderError::ForbiddenAttribute { .. } => "forbidden_attribute",
        OrderError::OutOfRange { .. } => "out_of_range",
        OrderError::IllegalTransition { .. } => "illegal_transition",
    };
    ApiError { field: e.field_path().map(String::from), ..ApiError::new(status, code, e.to_string()) }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::NotFound { .. } => ApiError::new(StatusCode::NOT_FOUND, "not_found", msg),
            EngineError::Order(o) | EngineError::Lifecycle(LifecycleError::Order(o)) => order_error(&o),
            EngineError::Conflict(_) => ApiError::new(StatusCode::CONFLICT, "conflict", msg),
            EngineError::Invalid { field, .. } => {
                ApiError { field, ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", msg) }
            }
            EngineError::Lifecycle(
                LifecycleError::OutsideActiveWindow { .. } | LifecycleError::NotActive(_),
            ) => ApiError::new(StatusCode::CONFLICT, "conflict", msg),
            EngineError::Exposure(ExposureError::TornDown(_)) => ApiError::new(StatusCode::CONFLICT, "torn_down", msg),
            EngineError::Exposure(ExposureError::ActionNotAllowed(_)) => {
                ApiError::new(StatusCode::FORBIDDEN, "action_not_allowed", msg)
            }
            EngineError::Exposure(_) => ApiError::new(StatusCode::FORBIDDEN, "not_exposed", msg),
            other => {
                warn!(error = %other, "internal error");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg)
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn tenant(state: &AppState, headers: &HeaderMap) -> ApiResult<String> {
    let header = headers.get(axum::http::header::AUTHORIZATION).and_then(|v| v.to_str().ok());
    state.tenants.authenticate(header).map(String::from).ok_or_else(ApiError::unauthorized)
}

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let raw: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(raw)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewOrder {
    template_id: String,
    #[serde(default)]
    overrides: BTreeMap<String, OverrideValue>,
    /// Id of a rejected order this one re-negotiates.
    #[serde(default)]
    renegotiates: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivateBody {
    /// Epoch minutes; defaults to the server clock.
    #[serde(default)]
    now: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceBody {
    loads: Vec<f64>,
}

async fn templates(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    tenant(&s, &headers)?;
    let templates = s.engine().templates();
    Ok(Json(json!({ "templates": templates })).into_response())
}

async fn create_order(State(s): State<AppState>, headers: HeaderMap, bytes: Bytes) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    let req: NewOrder = body(&bytes)?;
    let order = s.engine().submit(&t, &req.template_id, req.overrides, req.renegotiates.as_deref())?;
    Ok((StatusCode::CREATED, Json(order)).into_response())
}

async fn get_order(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    Ok(Json(s.engine().order(Some(&t), &id)?).into_response())
}

async fn process(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    if s.async_process {
        // Ownership and status are checked up front so the caller gets 404/409 synchronously.
        let view = s.engine().order(Some(&t), &id)?;
        let engine = s.engine.clone();
        let (tid, oid) = (t.clone(), id.clone());
        tokio::task::spawn_blocking(move || {
            let mut e = engine.lock().unwrap_or_else(|p| p.into_inner());
            if let Err(err) = e.process(Some(&tid), &oid) {
                warn!(order = %oid, error = %err, "background processing failed");
            }
        });
        return Ok((StatusCode::ACCEPTED, Json(json!({ "order_id": id, "status": view.order.status }))).into_response());
    }
    let engine = s.engine.clone();
    let view = tokio::task::spawn_blocking(move || {
        engine.lock().unwrap_or_else(|p| p.into_inner()).process(Some(&t), &id)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(view).into_response())
}

async fn validate(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    let engine = s.engine.clone();
    let view = tokio::task::spawn_blocking(move || {
        engine.lock().unwrap_or_else(|p| p.into_inner()).validate(Some(&t), &id)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(view).into_response())
}

async fn activate(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    let req: ActivateBody = body(&bytes)?;
    Ok(Json(s.engine().activate(Some(&t), &id, req.now)?).into_response())
}

async fn terminate(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    Ok(Json(s.engine().terminate(Some(&t), &id)?).into_response())
}

async fn trace(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    let req: TraceBody = body(&bytes)?;
    Ok(Json(s.engine().trace(Some(&t), &id, &req.loads)?).into_response())
}

async fn events(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    Ok(Json(s.engine().slice_events(Some(&t), &id)?).into_response())
}

async fn metrics(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Response> {
    let t = tenant(&s, &headers)?;
    let m = s.engine().metrics(Some(&t), &id)?;
    Ok(Json(json!({ "slice_id": id, "metrics": m })).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/catalog/templates", get(templates))
        .route("/orders", post(create_order))
        .route("/orders/{id}", get(get_order))
        .route("/orders/{id}/process", post(process))
        .route("/orders/{id}/validate", post(validate))
        .route("/slices/{id}/activate", post(activate))
        .route("/slices/{id}/terminate", post(terminate))
        .route("/slices/{id}/trace", post(trace))
        .route("/slices/{id}/events", get(events))
        .route("/slices/{id}/metrics", get(metrics))
        .with_state(state)
}

/// Serves the API until Ctrl-C.
pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
