//! HTTP routes over [`Service`].

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;
use tokio::sync::oneshot;
use tower_http::services::{ServeDir, ServeFile};

use crate::service::{ApiError, FeedParams, ScreencastRequest, Service, ShoutRequest, WindowParams};
use crate::validation::VerdictRequest;

type Shared = Arc<Service>;

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(ErrorBody { error: self.code(), message: self.to_string() })).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

/// Runs a store operation off the async workers, since appends may fsync.
async fn blocking<T, F>(svc: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

/// Builds the router. When `ui_dir` is set its files are served under `/`,
/// with `index.html` as the fallback for client-side routes such as
/// `/validate/<token>`.
pub fn router(svc: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/shouts", post(post_shout))
        .route("/api/feed", get(get_feed))
        .route("/api/feed/stream", get(feed_stream))
        .route("/api/sessions", get(get_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/screencast", post(post_screencast))
        .route("/api/health", get(health))
        .route("/api/validations/pending", get(pending))
        .route("/api/validations/{token}", get(get_validation).post(post_verdict))
        .route("/api/stats/developer/{nick}", get(developer_stats))
        .route("/api/stats/team", get(team_stats))
        .with_state(svc);
    match ui_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api,
    }
}

async fn post_shout(State(svc): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: ShoutRequest = parse_body(&body)?;
    let ack = blocking(svc, move |s| s.submit_shout(req)).await?;
    let status = if ack.accepted { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(ack)).into_response())
}

async fn get_feed(State(svc): State<Shared>, Query(params): Query<FeedParams>) -> Result<Response, ApiError> {
    Ok(Json(svc.feed(&params)?).into_response())
}

async fn feed_stream(State(svc): State<Shared>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = svc.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(entry) => {
                    let event = Event::default().event("shout").json_data(&entry).unwrap_or_default();
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Lagged(skipped)) => {
                    return Some((Ok(Event::default().event("lagged").data(skipped.to_string())), rx));
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn get_sessions(State(svc): State<Shared>, Query(params): Query<WindowParams>) -> Result<Response, ApiError> {
    Ok(Json(svc.list_sessions(&params)?).into_response())
}

async fn get_session(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(svc.session_detail(&id)?).into_response())
}

async fn post_screencast(State(svc): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: ScreencastRequest = parse_body(&body)?;
    let detail = blocking(svc, move |s| s.attach_screencast(&id, req)).await?;
    Ok(Json(detail).into_response())
}

async fn health(State(svc): State<Shared>) -> Response {
    Json(svc.health()).into_response()
}

#[derive(Deserialize)]
struct TokenParam {
    auth_token: Option<String>,
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(axum::http::header::AUTHORIZATION)?.to_str().ok()?;
    value.strip_prefix("Bearer ").map(|t| t.trim().to_string())
}

async fn pending(
    State(svc): State<Shared>,
    Query(q): Query<TokenParam>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let token = q.auth_token.or_else(|| bearer(&headers)).ok_or(ApiError::Unauthorized)?;
    Ok(Json(svc.pending_validations(&token)?).into_response())
}

async fn get_validation(State(svc): State<Shared>, Path(token): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(svc.review(&token)?).into_response())
}

async fn post_verdict(State(svc): State<Shared>, Path(token): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    if !svc.token_known(&token) {
        return Err(ApiError::NotFound("unknown validation token".into()));
    }
    let req: VerdictRequest = parse_body(&body)?;
    let view = blocking(svc, move |s| s.record_verdict(&token, req)).await?;
    Ok(Json(view).into_response())
}

async fn developer_stats(
    State(svc): State<Shared>,
    Path(nick): Path<String>,
    Query(params): Query<WindowParams>,
) -> Result<Response, ApiError> {
    Ok(Json(svc.developer_stats(&nick, &params)?).into_response())
}

async fn team_stats(State(svc): State<Shared>, Query(params): Query<WindowParams>) -> Result<Response, ApiError> {
    Ok(Json(svc.team_report_for(&params)?).into_response())
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// A server on its own runtime thread; dropping it shuts the server down.
/// Used by tests and tools that need a live endpoint.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(svc: Shared, ui_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let app = router(svc, ui_dir);
        let thread = std::thread::spawn(move || {
            let _ = rt.block_on(serve(listener, app, async {
                let _ = stopped.await;
            }));
        });
        Ok(BackgroundServer { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
