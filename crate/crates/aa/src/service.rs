//! Request handling independent of the HTTP transport.
//!
//! [`Service`] owns the store, the session cache and the configuration.
//! Every API endpoint is one method here, so the validation engine,
//! analytics and tests can drive the server without sockets.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Instant;

use aa_core::{
    normalize_shout_text, summarize_session, IdemKey, NickName, Origin, Session, SessionSummary, Shout,
    TimeslotConfig, Timestamp, ValidationState, Window,
};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use crate::store::{Credential, Entry, NewShout, Order, ScreencastRecord, SessionIndex, ShoutQuery, State, Store, StoreError};
use crate::ts::Clock;

pub const DEFAULT_FEED_LIMIT: usize = 50;
pub const MAX_FEED_LIMIT: usize = 500;
pub const MAX_FUTURE_SKEW_SECS: i64 = 24 * 3600;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown or revoked token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Unprocessable { code: &'static str, message: String },
    #[error("rate limit of {0} shouts per minute exceeded")]
    RateLimited(u32),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest(_) => 400,
            ApiError::Unauthorized => 401,
            ApiError::Forbidden(_) => 403,
            ApiError::NotFound(_) => 404,
            ApiError::Conflict(_) => 409,
            ApiError::Unprocessable { .. } => 422,
            ApiError::RateLimited(_) => 429,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::Unauthorized => "Unauthorized",
            ApiError::Forbidden(_) => "Forbidden",
            ApiError::NotFound(_) => "NotFound",
            ApiError::Conflict(_) => "Conflict",
            ApiError::Unprocessable { code, .. } => code,
            ApiError::RateLimited(_) => "RateLimited",
            ApiError::Internal(_) => "Internal",
        }
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::Unprocessable { code, message: message.into() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::AlreadyDecided => ApiError::Conflict("validation already decided".into()),
            StoreError::UnknownToken => ApiError::NotFound("unknown validation token".into()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub timeslot: TimeslotConfig,
    /// Accepted shouts per developer per minute; 0 disables the limit.
    pub rate_limit_per_min: u32,
    /// Prefix for validation links, e.g. `https://aa.example.org`.
    pub base_url: String,
    /// Developer-day requirement used by the team report.
    pub compliance_secs: i64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            timeslot: TimeslotConfig::default(),
            rate_limit_per_min: 60,
            base_url: "http://localhost:8080".into(),
            compliance_secs: 2 * 3600,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShoutRequest {
    pub auth_token: String,
    pub text: String,
    pub client_ts: String,
    pub client_id: String,
    pub seq: u64,
    #[serde(default)]
    pub origin: Option<Origin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShoutAck {
    pub id: u64,
    pub server_ts: Timestamp,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub id: u64,
    pub server_ts: Timestamp,
    pub client_ts: Timestamp,
    pub author: NickName,
    pub text: String,
    pub origin: Origin,
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedPage {
    pub entries: Vec<FeedEntry>,
    pub next_cursor: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct FeedParams {
    pub author: Option<String>,
    pub since: Option<String>,
    pub limit: Option<String>,
    pub cursor: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct WindowParams {
    pub author: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub author: NickName,
    pub started_at: Timestamp,
    pub ended_at: Timestamp,
    pub duration_s: i64,
    pub shout_count: usize,
    pub shout_ids: Vec<u64>,
    pub screencast_url: Option<String>,
    pub validation_state: ValidationState,
    pub closed_by_marker: bool,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            author: s.author.clone(),
            started_at: s.started_at,
            ended_at: s.ended_at,
            duration_s: s.duration_secs(),
            shout_count: s.len(),
            shout_ids: s.shout_ids.clone(),
            screencast_url: s.screencast_url.clone(),
            validation_state: s.validation_state,
            closed_by_marker: s.stopped_by_marker,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionShout {
    pub id: u64,
    pub client_ts: Timestamp,
    pub server_ts: Timestamp,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDetail {
    #[serde(flatten)]
    pub session: SessionView,
    pub summary: SessionSummary,
    pub shouts: Vec<SessionShout>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScreencastRequest {
    pub auth_token: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub journal_seq: u64,
    pub uptime_s: u64,
}

/// Shared server state. Writes go through the store's write lock, which is
/// the single-writer point for the journal.
pub struct Service {
    store: RwLock<Store>,
    sessions: SessionIndex,
    cfg: ServiceConfig,
    clock: Arc<dyn Clock>,
    rate: Mutex<HashMap<NickName, VecDeque<Timestamp>>>,
    feed_tx: broadcast::Sender<FeedEntry>,
    started: Instant,
}

impl Service {
    pub fn new(store: Store, cfg: ServiceConfig, clock: Arc<dyn Clock>) -> Self {
        let (feed_tx, _) = broadcast::channel(256);
        Service {
            store: RwLock::new(store),
            sessions: SessionIndex::new(cfg.timeslot),
            cfg,
            clock,
            rate: Mutex::new(HashMap::new()),
            feed_tx,
            started: Instant::now(),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn sessions_index(&self) -> &SessionIndex {
        &self.sessions
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().expect("store lock poisoned")
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().expect("store lock poisoned")
    }

    pub fn subscribe(&self) -> broadcast::Receiver<FeedEntry> {
        self.feed_tx.subscribe()
    }

    fn authenticate(&self, state: &State, token: &str) -> Result<Credential, ApiError> {
        state.authenticate(token).cloned().ok_or(ApiError::Unauthorized)
    }

    fn feed_entry(&self, state: &State, s: &Shout) -> FeedEntry {
        FeedEntry {
            id: s.id,
            server_ts: s.server_ts,
            client_ts: s.client_ts,
            author: s.author.clone(),
            text: s.text.clone(),
            origin: s.origin,
            session_id: self.sessions.session_id_of(state, s),
        }
    }

    /// Returns the ack and whether the shout was newly stored.
    pub fn submit_shout(&self, req: ShoutRequest) -> Result<ShoutAck, ApiError> {
        let now = self.now();
        let mut store = self.write();
        let cred = self.authenticate(store.state(), &req.auth_token)?;
        let author = cred.nick().clone();
        let origin = match (&cred, req.origin) {
            (Credential::Relay { .. }, _) => Origin::Bot,
            (_, Some(Origin::Bot)) | (_, None) => Origin::Http,
            (_, Some(o)) => o,
        };
        let idem_key = IdemKey { client_id: req.client_id, seq: req.seq };
        if let Some(existing_id) = store.state().idem_lookup(&idem_key) {
            let existing = store.state().shout(existing_id).expect("indexed shout exists");
            if existing.author != author {
                return Err(ApiError::Conflict("idempotency key belongs to another developer".into()));
            }
            return Ok(ShoutAck { id: existing.id, server_ts: existing.server_ts, accepted: false });
        }
        let text = normalize_shout_text(&req.text).map_err(|e| ApiError::unprocessable(e.code(), e.to_string()))?;
        let client_ts = crate::ts::parse(&req.client_ts).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        if client_ts - now > MAX_FUTURE_SKEW_SECS {
            return Err(ApiError::unprocessable("ClientTsInFuture", "client_ts is more than 24h ahead of the server"));
        }
        self.take_rate_slot(&author, now)?;
        let shout = store
            .ingest_shout(NewShout { author, text, client_ts, origin, idem_key }, now)
            .map_err(ApiError::from)?;
        let entry = self.feed_entry(store.state(), &shout);
        drop(store);
        let _ = self.feed_tx.send(entry);
        Ok(ShoutAck { id: shout.id, server_ts: shout.server_ts, accepted: true })
    }

    fn take_rate_slot(&self, author: &NickName, now: Timestamp) -> Result<(), ApiError> {
        let limit = self.cfg.rate_limit_per_min;
        if limit == 0 {
            return Ok(());
        }
        let mut rate = self.rate.lock().expect("rate lock poisoned");
        let recent = rate.entry(author.clone()).or_default();
        while recent.front().is_some_and(|t| now - *t >= 60) {
            recent.pop_front();
        }
        if recent.len() >= limit as usize {
            return Err(ApiError::RateLimited(limit));
        }
        recent.push_back(now);
        Ok(())
    }

    pub fn feed(&self, params: &FeedParams) -> Result<FeedPage, ApiError> {
        let limit = match params.limit.as_deref() {
            None | Some("") => DEFAULT_FEED_LIMIT,
            Some(raw) => raw.parse::<usize>().map_err(|_| ApiError::BadRequest(format!("bad limit {raw:?}")))?,
        };
        if !(1..=MAX_FEED_LIMIT).contains(&limit) {
            return Err(ApiError::BadRequest(format!("limit must be between 1 and {MAX_FEED_LIMIT}")));
        }
        let author = parse_nick_param(params.author.as_deref())?;
        let since = parse_ts_param(params.since.as_deref())?;
        let before_id = params.cursor.as_deref().filter(|c| !c.is_empty()).map(decode_cursor).transpose()?;
        let store = self.read();
        let state = store.state();
        let mut hits = state.query_shouts(&ShoutQuery {
            author,
            since,
            until: None,
            limit: Some(limit + 1),
            order: Order::NewestFirst,
            before_id,
        });
        let more = hits.len() > limit;
        hits.truncate(limit);
        let next_cursor = if more { hits.last().map(|s| encode_cursor(s.id)) } else { None };
        let entries = hits.into_iter().map(|s| self.feed_entry(state, s)).collect();
        Ok(FeedPage { entries, next_cursor })
    }

    pub fn list_sessions(&self, params: &WindowParams) -> Result<Vec<SessionView>, ApiError> {
        let author = parse_nick_param(params.author.as_deref())?;
        let window = parse_window(params, Window::ALL)?;
        let store = self.read();
        Ok(self.sessions.list(store.state(), author.as_ref(), window).iter().map(SessionView::from).collect())
    }

    fn detail(&self, state: &State, s: &Session) -> SessionDetail {
        SessionDetail {
            session: SessionView::from(s),
            summary: summarize_session(s),
            shouts: s
                .shout_ids
                .iter()
                .filter_map(|id| state.shout(*id))
                .map(|sh| SessionShout { id: sh.id, client_ts: sh.client_ts, server_ts: sh.server_ts, text: sh.text.clone() })
                .collect(),
        }
    }

    pub fn session_detail(&self, session_id: &str) -> Result<SessionDetail, ApiError> {
        let store = self.read();
        let s = self
            .sessions
            .find(store.state(), session_id)
            .ok_or_else(|| ApiError::NotFound(format!("no session {session_id}")))?;
        Ok(self.detail(store.state(), &s))
    }

    pub fn attach_screencast(&self, session_id: &str, req: ScreencastRequest) -> Result<SessionDetail, ApiError> {
        let now = self.now();
        let mut store = self.write();
        let cred = self.authenticate(store.state(), &req.auth_token)?;
        let session = self
            .sessions
            .find(store.state(), session_id)
            .ok_or_else(|| ApiError::NotFound(format!("no session {session_id}")))?;
        if cred.nick() != &session.author {
            return Err(ApiError::Forbidden("only the session author may attach a screencast".into()));
        }
        let url = validate_http_url(&req.url)?;
        store.append(
            now,
            Entry::ScreencastAttach(ScreencastRecord { session_id: session_id.to_string(), author: session.author, url }),
        )?;
        let updated = self.sessions.find(store.state(), session_id).expect("session still present");
        Ok(self.detail(store.state(), &updated))
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            journal_seq: self.read().journal_seq(),
            uptime_s: self.started.elapsed().as_secs(),
        }
    }

    /// The detail view for a session id, used by validation review.
    pub(crate) fn session_detail_in(&self, state: &State, session_id: &str) -> Option<SessionDetail> {
        self.sessions.find(state, session_id).map(|s| self.detail(state, &s))
    }

    pub(crate) fn authenticate_token(&self, state: &State, token: &str) -> Result<Credential, ApiError> {
        self.authenticate(state, token)
    }
}

pub fn validate_http_url(raw: &str) -> Result<String, ApiError> {
    let bad = || ApiError::unprocessable("InvalidUrl", format!("{raw:?} is not an http(s) URL"));
    let url = url::Url::parse(raw.trim()).map_err(|_| bad())?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none_or(str::is_empty) {
        return Err(bad());
    }
    Ok(url.to_string())
}

fn encode_cursor(before_id: u64) -> String {
    URL_SAFE_NO_PAD.encode(format!("before:{before_id}"))
}

fn decode_cursor(raw: &str) -> Result<u64, ApiError> {
    let bad = || ApiError::BadRequest("bad cursor".into());
    let bytes = URL_SAFE_NO_PAD.decode(raw).map_err(|_| bad())?;
    let text = std::str::from_utf8(&bytes).map_err(|_| bad())?;
    text.strip_prefix("before:").and_then(|n| n.parse().ok()).ok_or_else(bad)
}

pub(crate) fn parse_nick_param(raw: Option<&str>) -> Result<Option<NickName>, ApiError> {
    match raw {
        None | Some("") => Ok(None),
        Some(n) => NickName::parse(n).map(Some).map_err(|e| ApiError::BadRequest(e.to_string())),
    }
}

pub(crate) fn parse_ts_param(raw: Option<&str>) -> Result<Option<Timestamp>, ApiError> {
    match raw {
        None | Some("") => Ok(None),
        Some(t) => crate::ts::parse(t).map(Some).map_err(|e| ApiError::BadRequest(e.to_string())),
    }
}

pub(crate) fn parse_window(params: &WindowParams, default: Window) -> Result<Window, ApiError> {
    let from = parse_ts_param(params.from.as_deref())?.unwrap_or(default.from);
    let to = parse_ts_param(params.to.as_deref())?.unwrap_or(default.to);
    Window::new(from, to).map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_round_trip_and_rejects_garbage() {
        assert_eq!(decode_cursor(&encode_cursor(42)).unwrap(), 42);
        assert!(decode_cursor("!!").is_err());
        assert!(decode_cursor(&URL_SAFE_NO_PAD.encode("after:3")).is_err());
    }

    #[test]
    fn url_rules() {
        assert_eq!(validate_http_url("https://vimeo.com/pet-0-3-1").unwrap(), "https://vimeo.com/pet-0-3-1");
        assert!(validate_http_url("http://example.org").is_ok());
        for bad in ["ftp://x", "vimeo.com/x", "", "javascript:alert(1)", "https://"] {
            assert_eq!(validate_http_url(bad).unwrap_err().status(), 422, "{bad}");
        }
    }
}
