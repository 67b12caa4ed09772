//! HTTP ingestion service.
//!
//! POST /ingest/{source} accepts a JSON document (or text/plain NMEA for
//! GNSS routes) and answers 202 with the enqueued record count, 422 with
//! the validation report when standardization does not converge, 400 on
//! parse failures, and 503 with Retry-After when the queue is full.
//! Standardization runs on the blocking pool so backend latency never
//! stalls the accept loop.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::{IngestError, PayloadBody, Pipeline};

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/ingest/{source}", post(ingest))
        .route("/health", get(health))
        .route("/trajectory/latest", get(trajectory_latest))
        .route("/metrics/counters", get(counters))
        .with_state(pipeline)
}

/// Binds the router to the listener and serves until the task is dropped.
pub async fn serve(
    listener: tokio::net::TcpListener,
    pipeline: Arc<Pipeline>,
) -> std::io::Result<()> {
    axum::serve(listener, router(pipeline)).await
}

async fn ingest(
    State(pipeline): State<Arc<Pipeline>>,
    Path(source): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let payload = if content_type.starts_with("text/plain") {
        match String::from_utf8(body.to_vec()) {
            Ok(text) => PayloadBody::Text(text),
            Err(e) => return bad_request(format!("body is not UTF-8: {e}")),
        }
    } else {
        match serde_json::from_slice(&body) {
            Ok(value) => PayloadBody::Json(value),
            Err(e) => return bad_request(format!("body is not JSON: {e}")),
        }
    };
    let received_at = chrono::Utc::now().timestamp_nanos_opt().unwrap_or(1).max(1);

    let result =
        tokio::task::spawn_blocking(move || pipeline.process_payload(&source, payload, received_at))
            .await;
    match result {
        Ok(Ok(reply)) => (StatusCode::ACCEPTED, Json(reply)).into_response(),
        Ok(Err(error)) => error_response(error),
        Err(join) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": join.to_string()})),
        )
            .into_response(),
    }
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({"error": message}))).into_response()
}

fn error_response(error: IngestError) -> Response {
    match error {
        IngestError::NonConvergent(report) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(report)).into_response()
        }
        IngestError::NoRecords => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({"error": "payload produced no records"})),
        )
            .into_response(),
        IngestError::UnknownSource(source) => (
            StatusCode::NOT_FOUND,
            Json(json!({"error": format!("unknown source '{source}'")})),
        )
            .into_response(),
        IngestError::QueueFull => (
            StatusCode::SERVICE_UNAVAILABLE,
            [(header::RETRY_AFTER, "1")],
            Json(json!({"error": "fusion queue is full"})),
        )
            .into_response(),
        error @ (IngestError::Parse(_) | IngestError::Nmea(_)) => {
            bad_request(error.to_string())
        }
        other => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": other.to_string()})),
        )
            .into_response(),
    }
}

async fn health() -> impl IntoResponse {
    Json(json!({"status": "ok"}))
}

async fn trajectory_latest(State(pipeline): State<Arc<Pipeline>>) -> Response {
    match pipeline.latest_point() {
        Some(point) => Json(point).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(json!({"error": "no fused estimate yet"})),
        )
            .into_response(),
    }
}

async fn counters(State(pipeline): State<Arc<Pipeline>>) -> impl IntoResponse {
    Json(pipeline.counters())
}
