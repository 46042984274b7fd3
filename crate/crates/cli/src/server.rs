//! Session-ingestion HTTP service used by the browser test runner.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use iat_core::scoring::{association_label, d_score};
use iat_core::session::{read_session, standard_block_layout, stimulus_items};
use iat_core::Error as CoreError;
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::store::{InsertError, Source, Store};
use crate::strategy;

/// Response keys for the left and right categories.
pub const LEFT_KEY: &str = "E";
pub const RIGHT_KEY: &str = "I";

pub struct AppState {
    pub store: Store,
    /// Draws the strategy shown to each participant.
    rng: Mutex<ChaCha8Rng>,
}

impl AppState {
    pub fn new(store: Store, seed: u64) -> AppState {
        AppState {
            store,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/config", get(config))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/score", get(get_score))
        .route("/api/strategy", get(get_strategy))
        .with_state(state)
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!(
        "listening on http://{} (store {})",
        listener.local_addr()?,
        state.store.path().display()
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn config() -> Json<serde_json::Value> {
    Json(json!({
        "stimuli": stimulus_items(),
        "blocks": standard_block_layout(),
        "keys": { "left": LEFT_KEY, "right": RIGHT_KEY },
    }))
}

#[derive(Deserialize)]
struct CreateParams {
    source: Option<Source>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Query(params): Query<CreateParams>,
    body: Bytes,
) -> Response {
    let session = match read_session(&body) {
        Ok(s) => s,
        Err(CoreError::Validation(violations)) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "invalid session", "violations": violations }),
            )
        }
        Err(e) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "malformed session", "violations": [e.to_string()] }),
            )
        }
    };
    let scored = d_score(&session);
    let session_id = session.session_id.clone();
    match state.store.insert(session, params.source.unwrap_or(Source::Ui)) {
        Ok(_) => {}
        Err(InsertError::Duplicate(id)) => {
            return error(StatusCode::CONFLICT, json!({ "error": "duplicate session_id", "session_id": id }))
        }
        Err(InsertError::Io(e)) => {
            log::error!("store append failed: {e}");
            return error(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "store write failed" }));
        }
    }
    let body = match scored {
        Ok(r) => json!({
            "session_id": session_id,
            "d_score": r.d_score,
            "association": association_label(&r).to_string(),
        }),
        // stored, but the score cannot be shown
        Err(e) => json!({
            "session_id": session_id,
            "d_score": null,
            "association": null,
            "unscorable": e.to_string(),
        }),
    };
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Response {
    Json(state.store.list()).into_response()
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.store.get(&id) {
        Some(record) => Json(record).into_response(),
        None => not_found(&id),
    }
}

async fn get_score(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(record) = state.store.get(&id) else {
        return not_found(&id);
    };
    match d_score(&record.session) {
        Ok(r) => Json(r).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": e.to_string() })),
    }
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, json!({ "error": "unknown session", "session_id": id }))
}

#[derive(Deserialize)]
struct StrategyParams {
    score: f64,
}

async fn get_strategy(State(state): State<Arc<AppState>>, Query(params): Query<StrategyParams>) -> Response {
    if !params.score.is_finite() {
        return error(StatusCode::BAD_REQUEST, json!({ "error": "score must be finite" }));
    }
    let id = state.rng.lock().random_range(1..=5u8);
    Json(strategy::instruction(id, params.score)).into_response()
}
