//! The developer-side client behind the `aa` command.

pub mod queue;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use aa_core::{normalize_shout_text, AlertSchedule, Marker, Origin, TextError, TimeslotConfig, Timestamp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ts::Clock;
pub use queue::{ClientQueue, EntryState, LocalEntry, QueueError, QueueRecord, QueueView};

pub const DEFAULT_TIMESLOT_MIN: u32 = 15;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("nothing to shout")]
    EmptyText,
    #[error("{0}")]
    InvalidText(String),
    #[error("not configured: {0}")]
    MissingConfig(String),
    #[error("a session is already active (started {0})")]
    SessionActive(Timestamp),
    #[error("no active session")]
    NoSession,
    #[error("server rejected the shout: {0}")]
    Rejected(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl ClientError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::EmptyText => 2,
            ClientError::MissingConfig(_) => 3,
            ClientError::SessionActive(_) => 4,
            ClientError::NoSession => 5,
            _ => 1,
        }
    }
}

impl From<TextError> for ClientError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::EmptyShout => ClientError::EmptyText,
            other => ClientError::InvalidText(other.to_string()),
        }
    }
}

/// Contents of `config.toml`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileConfig {
    pub server_url: Option<String>,
    pub auth_token: Option<String>,
    pub client_id: Option<String>,
    pub timeslot: Option<u32>,
}

/// Values given on the command line or in the environment; they win over
/// the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub home: Option<PathBuf>,
    pub server_url: Option<String>,
    pub auth_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub config_path: PathBuf,
    /// Directory holding the queue.
    pub home: PathBuf,
    pub server_url: Option<String>,
    pub auth_token: Option<String>,
    pub client_id: Option<String>,
    pub timeslot: u32,
}

impl Settings {
    /// Config path: explicit, else `<home>/config.toml` when a home is
    /// given, else the per-user config dir. A missing file is not an error.
    pub fn load(ov: Overrides) -> Result<Settings, ClientError> {
        let home = match ov.home.clone() {
            Some(h) => h,
            None => dirs::data_local_dir()
                .map(|d| d.join("aa"))
                .ok_or_else(|| ClientError::MissingConfig("cannot determine a data directory; set AA_HOME".into()))?,
        };
        let config_path = match (ov.config, &ov.home) {
            (Some(p), _) => p,
            (None, Some(h)) => h.join("config.toml"),
            (None, None) => dirs::config_dir()
                .map(|d| d.join("aa").join("config.toml"))
                .ok_or_else(|| ClientError::MissingConfig("cannot determine a config directory; set AA_CONFIG".into()))?,
        };
        let file = match std::fs::read_to_string(&config_path) {
            Ok(text) => toml::from_str::<FileConfig>(&text)
                .map_err(|e| ClientError::MissingConfig(format!("{}: {e}", config_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => FileConfig::default(),
            Err(e) => return Err(e.into()),
        };
        let nonempty = |s: Option<String>| s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        Ok(Settings {
            home,
            server_url: nonempty(ov.server_url).or(nonempty(file.server_url)),
            auth_token: nonempty(ov.auth_token).or(nonempty(file.auth_token)),
            client_id: nonempty(file.client_id),
            timeslot: file.timeslot.unwrap_or(DEFAULT_TIMESLOT_MIN),
            config_path,
        })
    }

    /// Server URL and token, or exit-3 error naming what is missing.
    pub fn endpoint(&self) -> Result<(String, String), ClientError> {
        let missing = |what: &str| {
            ClientError::MissingConfig(format!("{what} is not set (config {} or environment)", self.config_path.display()))
        };
        let url = self.server_url.clone().ok_or_else(|| missing("server_url"))?;
        let token = self.auth_token.clone().ok_or_else(|| missing("auth_token"))?;
        Ok((url, token))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutgoingShout {
    pub text: String,
    #[serde(with = "crate::ts")]
    pub client_ts: Timestamp,
    pub client_id: String,
    pub seq: u64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendOutcome {
    Stored { id: u64, server_ts: Timestamp, accepted: bool },
    /// The server will never accept this entry (malformed, too long, ...).
    Rejected { status: u16, code: String, message: String },
}

/// A failure that says nothing about the entry itself; retry later.
#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait ShoutTransport {
    fn send(&mut self, shout: &OutgoingShout) -> Result<SendOutcome, TransportError>;
    fn health(&mut self) -> Result<(), TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    base: String,
    token: String,
}

#[derive(Serialize)]
struct ShoutBody<'a> {
    auth_token: &'a str,
    #[serde(flatten)]
    shout: &'a OutgoingShout,
}

#[derive(Deserialize)]
struct AckBody {
    id: u64,
    #[serde(with = "crate::ts")]
    server_ts: Timestamp,
    accepted: bool,
}

#[derive(Deserialize, Default)]
struct ErrorBody {
    #[serde(default)]
    error: String,
    #[serde(default)]
    message: String,
}

impl HttpTransport {
    pub fn new(base: &str, token: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        HttpTransport { agent, base: base.trim_end_matches('/').to_string(), token: token.to_string() }
    }
}

impl ShoutTransport for HttpTransport {
    fn send(&mut self, shout: &OutgoingShout) -> Result<SendOutcome, TransportError> {
        let url = format!("{}/api/shouts", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(ShoutBody { auth_token: &self.token, shout })
            .map_err(|e| TransportError(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            let ack: AckBody = resp.body_mut().read_json().map_err(|e| TransportError(format!("bad ack: {e}")))?;
            return Ok(SendOutcome::Stored { id: ack.id, server_ts: ack.server_ts, accepted: ack.accepted });
        }
        let body: ErrorBody = resp.body_mut().read_json().unwrap_or_default();
        match status {
            400 | 409 | 422 => Ok(SendOutcome::Rejected { status, code: body.error, message: body.message }),
            _ => Err(TransportError(format!("server answered {status}: {}", body.message))),
        }
    }

    fn health(&mut self) -> Result<(), TransportError> {
        let url = format!("{}/api/health", self.base);
        let resp = self.agent.get(&url).call().map_err(|e| TransportError(format!("{url}: {e}")))?;
        match resp.status().as_u16() {
            200 => Ok(()),
            s => Err(TransportError(format!("health answered {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// The request never reaches the server.
    DropRequest,
    /// The server stores the shout but the answer is lost.
    LoseResponse,
}

/// Wraps a transport and fails every send after the first `healthy_sends`.
pub struct FaultyTransport<T> {
    pub inner: T,
    pub healthy_sends: usize,
    pub mode: FaultMode,
    sends: usize,
}

impl<T> FaultyTransport<T> {
    pub fn new(inner: T, healthy_sends: usize, mode: FaultMode) -> Self {
        FaultyTransport { inner, healthy_sends, mode, sends: 0 }
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

impl<T: ShoutTransport> ShoutTransport for FaultyTransport<T> {
    fn send(&mut self, shout: &OutgoingShout) -> Result<SendOutcome, TransportError> {
        self.sends += 1;
        if self.sends <= self.healthy_sends {
            return self.inner.send(shout);
        }
        if self.mode == FaultMode::LoseResponse {
            let _ = self.inner.send(shout);
        }
        Err(TransportError("injected transport fault".into()))
    }

    fn health(&mut self) -> Result<(), TransportError> {
        if self.sends >= self.healthy_sends {
            return Err(TransportError("injected transport fault".into()));
        }
        self.inner.health()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PushReport {
    pub sent: usize,
    pub remaining: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<u64>,
    #[serde(skip)]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShoutStatus {
    Sent,
    Queued,
}

impl ShoutStatus {
    pub fn line(self) -> &'static str {
        match self {
            ShoutStatus::Sent => "sent",
            ShoutStatus::Queued => "queued (offline)",
        }
    }
}

/// A queue plus the transport used to drain it.
pub struct Client<T> {
    pub queue: ClientQueue,
    pub transport: T,
    pub origin: Origin,
}

impl<T: ShoutTransport> Client<T> {
    pub fn new(queue: ClientQueue, transport: T) -> Self {
        Client { queue, transport, origin: Origin::Cli }
    }

    /// Sends queued entries in seq order, stopping at the first transport
    /// failure. Entries the server refuses outright are marked rejected and
    /// skipped.
    pub fn push(&mut self, now: Timestamp) -> Result<PushReport, ClientError> {
        let mut report = PushReport::default();
        let pending: Vec<LocalEntry> = self.queue.view().queued().cloned().collect();
        for entry in pending {
            let out = OutgoingShout {
                text: entry.text.clone(),
                client_ts: entry.client_ts,
                client_id: self.queue.client_id().to_string(),
                seq: entry.seq,
                origin: self.origin,
            };
            match self.transport.send(&out) {
                Ok(SendOutcome::Stored { id, server_ts, .. }) => {
                    self.queue.mark_pushed(entry.seq, id, server_ts, now)?;
                    report.sent += 1;
                }
                Ok(SendOutcome::Rejected { status, code, message }) => {
                    self.queue.mark_rejected(entry.seq, &code, &message, now)?;
                    report.rejected.push(entry.seq);
                    report.errors.push(format!("#{} rejected ({status} {code}): {message}", entry.seq));
                }
                Err(e) => {
                    report.errors.push(format!("#{}: {e}", entry.seq));
                    break;
                }
            }
        }
        report.remaining = self.queue.view().depth();
        Ok(report)
    }

    /// Queues `text` stamped `now`, then tries to deliver the whole queue.
    pub fn shout(&mut self, text: &str, now: Timestamp) -> Result<ShoutStatus, ClientError> {
        let text = normalize_shout_text(text)?;
        let seq = self.queue.enqueue(text, now, now)?;
        self.push(now)?;
        let entry = self.queue.view().entries.iter().rev().find(|e| e.seq == seq).cloned();
        match entry.map(|e| e.state) {
            Some(EntryState::Pushed { .. }) => Ok(ShoutStatus::Sent),
            Some(EntryState::Rejected { code }) => Err(ClientError::Rejected(code)),
            _ => Ok(ShoutStatus::Queued),
        }
    }

    pub fn session_start(&mut self, now: Timestamp) -> Result<ShoutStatus, ClientError> {
        if let Some(since) = self.queue.view().active_session() {
            return Err(ClientError::SessionActive(since));
        }
        self.shout(Marker::Start.text(), now)
    }

    pub fn session_stop(&mut self, now: Timestamp) -> Result<ShoutStatus, ClientError> {
        if self.queue.view().active_session().is_none() {
            return Err(ClientError::NoSession);
        }
        self.shout(Marker::Stop.text(), now)
    }
}

pub fn status_lines(view: &QueueView, reachability: Option<Result<(), TransportError>>) -> Vec<String> {
    let session = match view.active_session() {
        Some(since) => format!("session active since {}", crate::ts::display_short(since)),
        None => "no session".to_string(),
    };
    let queue = match view.depth() {
        0 => "queue empty".to_string(),
        n => format!("{n} queued"),
    };
    let mut lines = vec![format!("{session}, {queue}")];
    lines.push(match reachability {
        None => "server: not configured".to_string(),
        Some(Ok(())) => "server: reachable".to_string(),
        Some(Err(e)) => format!("server: unreachable ({e})"),
    });
    lines
}

pub fn log_lines(view: &QueueView, n: usize) -> Vec<String> {
    let skip = view.entries.len().saturating_sub(n);
    view.entries[skip..]
        .iter()
        .map(|e| {
            let state = match &e.state {
                EntryState::Queued => "queued".to_string(),
                EntryState::Pushed { id } => format!("#{id}"),
                EntryState::Rejected { code } => format!("rejected:{code}"),
            };
            format!("{}  {:<10} {}", crate::ts::display_short(e.client_ts), state, e.text)
        })
        .collect()
}

pub const POLL_INTERVAL: Duration = Duration::from_secs(1);

/// Rings at each timeslot boundary while the session that started at
/// `started` stays active. Activity is read from the queue, so shouts from
/// other terminals push the next alert back. Returns the alert times.
pub fn alert_loop(
    home: &Path,
    cfg: TimeslotConfig,
    started: Timestamp,
    clock: &dyn Clock,
    out: &mut dyn Write,
    sleep: &mut dyn FnMut(Duration),
) -> Result<Vec<Timestamp>, ClientError> {
    let mut schedule = AlertSchedule::start(cfg, started);
    let mut fired = Vec::new();
    writeln!(out, "session started; alerts every {} min. `aa session stop` ends it.", cfg.timeslot_min())?;
    loop {
        sleep(POLL_INTERVAL);
        let view = ClientQueue::snapshot(home)?;
        if view.active_session() != Some(started) {
            writeln!(out, "session stopped.")?;
            return Ok(fired);
        }
        if let Some(last) = view.last_activity() {
            schedule.record_activity(last);
        }
        if let Some(at) = schedule.poll(clock.now()) {
            write!(out, "\x07")?;
            writeln!(out, "[{}] timeslot over: what are you working on? (aa shout ...)", crate::ts::display_short(at))?;
            out.flush()?;
            fired.push(at);
        }
    }
}
