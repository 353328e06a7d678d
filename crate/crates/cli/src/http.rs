//! HTTP surface. JSON in and out; see docs/formats.md for the bodies.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::app::{ApiResult, App, FeedQuery, RequeueRequest};
use crate::error::{ApiError, ErrorBody};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody { error: self })).into_response()
    }
}

type Shared = Arc<App>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

/// Like [`body`], but an empty body means the default value.
fn body_or_default<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        body(bytes)
    }
}

/// Run a store operation off the async runtime.
async fn blocking<T, F>(app: Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&App) -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| ApiError::internal(format!("request handler failed: {e}")))?
}

fn created<T: Serialize>(v: T) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

async fn list_tables(State(app): State<Shared>) -> ApiResult<Response> {
    let v = blocking(app, |a| a.list_tables()).await?;
    Ok(Json(v).into_response())
}

async fn create_table(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(created(blocking(app, move |a| a.create_table(req)).await?))
}

async fn show_table(State(app): State<Shared>, Path(table): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(app, move |a| a.show_table(&table)).await?).into_response())
}

async fn add_column(State(app): State<Shared>, Path(table): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(created(blocking(app, move |a| a.add_column(&table, req)).await?))
}

async fn add_entry(State(app): State<Shared>, Path(table): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(created(blocking(app, move |a| a.add_entry(&table, req)).await?))
}

async fn annotate(State(app): State<Shared>, Path(table): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(created(blocking(app, move |a| a.annotate(&table, req)).await?))
}

async fn export(State(app): State<Shared>, Path(table): Path<String>) -> ApiResult<Response> {
    let (id, xml) = blocking(app, move |a| a.export(&table)).await?;
    Ok((
        [
            (
                header::CONTENT_TYPE,
                "application/vnd.ms-excel; charset=utf-8".to_owned(),
            ),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.export.xml\""),
            ),
        ],
        xml,
    )
        .into_response())
}

async fn feed(State(app): State<Shared>, query: Result<Query<FeedQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(Json(blocking(app, move |a| a.feed(q)).await?).into_response())
}

async fn sync_status(State(app): State<Shared>) -> ApiResult<Response> {
    Ok(Json(blocking(app, |a| Ok(a.sync_status())).await?).into_response())
}

async fn sync_flush(State(app): State<Shared>) -> ApiResult<Response> {
    Ok(Json(blocking(app, |a| a.run_once()).await?).into_response())
}

async fn requeue_failed(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req: RequeueRequest = body_or_default(&bytes)?;
    let requeued = blocking(app, move |a| a.requeue_failed(req)).await?;
    Ok(Json(json!({ "requeued": requeued })).into_response())
}

async fn get_connectivity(State(app): State<Shared>) -> ApiResult<Response> {
    Ok(Json(app.connectivity()).into_response())
}

async fn put_connectivity(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let state = body(&bytes)?;
    Ok(Json(blocking(app, move |a| a.set_connectivity(state)).await?).into_response())
}

async fn run_harvest(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(Json(blocking(app, move |a| a.harvest(req)).await?).into_response())
}

async fn chunk_preview(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(Json(blocking(app, move |a| a.chunk_preview(req)).await?).into_response())
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(app: Shared) -> Router {
    Router::new()
        .route("/tables", get(list_tables).post(create_table))
        .route("/tables/{table}", get(show_table))
        .route("/tables/{table}/columns", post(add_column))
        .route("/tables/{table}/entries", post(add_entry))
        .route("/tables/{table}/annotations", post(annotate))
        .route("/tables/{table}/export", get(export))
        .route("/feed", get(feed))
        .route("/sync/status", get(sync_status))
        .route("/sync/flush", post(sync_flush))
        .route("/sync/requeue-failed", post(requeue_failed))
        .route("/sim/connectivity", get(get_connectivity).put(put_connectivity))
        .route("/harvest", post(run_harvest))
        .route("/chunk-preview", post(chunk_preview))
        .fallback(not_found)
        .with_state(app)
}
