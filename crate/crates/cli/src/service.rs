//! Minimal HTTP prediction endpoint.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use profile_gender::{GenderLabel, GenderModel};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub const MAX_BODY_BYTES: usize = 8 * 1024;

#[derive(Debug, Deserialize)]
pub struct PredictRequest {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub gender: String,
    pub probability: f64,
    pub model_version: String,
}

struct Shared {
    model: GenderModel,
    version: String,
}

/// Label and confidence for a bare name, or `None` when the name is blank.
pub fn predict_name(model: &GenderModel, name: &str) -> Option<(GenderLabel, f64)> {
    if name.trim().is_empty() {
        return None;
    }
    let p = model.predict_name(name);
    Some((p.label, p.confidence()))
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn predict(State(shared): State<Arc<Shared>>, body: Bytes) -> Response {
    let request: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    match predict_name(&shared.model, &request.name) {
        None => error(StatusCode::BAD_REQUEST, "name must not be empty"),
        Some((label, probability)) => Json(PredictResponse {
            gender: label.to_string(),
            probability,
            model_version: shared.version.clone(),
        })
        .into_response(),
    }
}

async fn health(State(shared): State<Arc<Shared>>) -> Response {
    Json(serde_json::json!({ "status": "ok", "model_version": shared.version })).into_response()
}

pub fn router(model: GenderModel) -> Router {
    let version = model.version();
    let shared = Arc::new(Shared { model, version });
    Router::new()
        .route("/predict", post(predict))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(shared)
}

/// Serves until the task is cancelled or the listener fails.
pub async fn serve_on(listener: TcpListener, model: GenderModel) -> std::io::Result<()> {
    axum::serve(listener, router(model)).await
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, model: GenderModel) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(model))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
