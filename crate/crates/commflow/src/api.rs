//! Read-only JSON HTTP API over an immutable workspace snapshot.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Serialize;

use crate::error::AppError;
use crate::views::{self, BoxplotQuery, EvolutionQuery, GraphQuery, ReachQuery};
use crate::workspace::Workspace;

type Shared = State<Arc<Workspace>>;

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, views::to_json(&self.body()))
    }
}

fn respond<T: Serialize>(r: Result<T, AppError>) -> Response {
    match r {
        Ok(v) => json_response(StatusCode::OK, views::to_json(&v)),
        Err(e) => e.into_response(),
    }
}

/// Runs a view on the blocking pool.
async fn blocking<T, F>(f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, AppError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => respond(r),
        Err(e) => AppError::Internal(format!("worker failed: {e}")).into_response(),
    }
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, AppError> {
    q.map(|Query(v)| v).map_err(|e| AppError::bad("query", e.body_text()))
}

/// Raises the flag when dropped, which happens when the client goes away
/// before the response is ready.
struct CancelOnDrop(Arc<AtomicBool>);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.store(true, Ordering::Relaxed);
    }
}

async fn list_groups(State(ws): Shared) -> Response {
    respond(Ok(views::groups(&ws)))
}

async fn group_metric(State(ws): Shared, Path(g): Path<String>) -> Response {
    blocking(move || views::metric(&ws, &g).map(|m| (*m).clone())).await
}

async fn group_swarm(State(ws): Shared, Path(g): Path<String>) -> Response {
    blocking(move || views::swarm(&ws, &g)).await
}

async fn patient_measures(State(ws): Shared, Path(p): Path<String>) -> Response {
    blocking(move || views::patient_measures(&ws, &p)).await
}

async fn patient_boxplot(State(ws): Shared, Path(p): Path<String>, q: Result<Query<BoxplotQuery>, QueryRejection>) -> Response {
    match query(q) {
        Ok(q) => blocking(move || views::boxplot(&ws, &p, &q)).await,
        Err(e) => e.into_response(),
    }
}

async fn patient_evolution(State(ws): Shared, Path(p): Path<String>, q: Result<Query<EvolutionQuery>, QueryRejection>) -> Response {
    match query(q) {
        Ok(q) => blocking(move || views::evolution(&ws, &p, &q)).await,
        Err(e) => e.into_response(),
    }
}

async fn patient_graph(State(ws): Shared, Path(p): Path<String>, q: Result<Query<GraphQuery>, QueryRejection>) -> Response {
    match query(q) {
        Ok(q) => blocking(move || views::graph(&ws, &p, &q)).await,
        Err(e) => e.into_response(),
    }
}

async fn patient_reach(State(ws): Shared, Path(p): Path<String>, q: Result<Query<ReachQuery>, QueryRejection>) -> Response {
    let q = match query(q) {
        Ok(q) => q,
        Err(e) => return e.into_response(),
    };
    let flag = Arc::new(AtomicBool::new(false));
    let _guard = CancelOnDrop(flag.clone());
    blocking(move || views::reach(&ws, &p, &q, Some(&flag))).await
}

async fn not_found() -> Response {
    AppError::NotFound {
        what: "route",
        id: "requested path".into(),
    }
    .into_response()
}

pub fn router(ws: Arc<Workspace>) -> Router {
    Router::new()
        .route("/groups", get(list_groups))
        .route("/groups/{g}/metric", get(group_metric))
        .route("/groups/{g}/swarm", get(group_swarm))
        .route("/patients/{p}/measures", get(patient_measures))
        .route("/patients/{p}/boxplot", get(patient_boxplot))
        .route("/patients/{p}/evolution", get(patient_evolution))
        .route("/patients/{p}/graph", get(patient_graph))
        .route("/patients/{p}/reach", get(patient_reach))
        .fallback(not_found)
        .with_state(ws)
}

/// Binds `addr` and serves until Ctrl-C. Binding failures (such as a busy
/// port) are returned before any request is accepted.
pub async fn serve(ws: Arc<Workspace>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(ws))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
