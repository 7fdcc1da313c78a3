//! IRC relay: turns `shout <text>` messages from mapped nicks into shouts.

pub mod irc;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use aa_core::{normalize_shout_text, NickName, Origin, TextError};
use serde::Deserialize;
use thiserror::Error;
use tracing::{info, warn};

use crate::client::{Client, ClientError, ClientQueue, HttpTransport, ShoutStatus};
use crate::ts::Clock;
use irc::Message;

#[derive(Debug, Error)]
pub enum BotConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct AliasEntry {
    pub irc_nick: String,
    pub developer: NickName,
    /// Relay token issued by `aa-server dev alias`.
    pub relay_token: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct AliasFile {
    #[serde(default, rename = "alias")]
    aliases: Vec<AliasEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BotConfig {
    pub server: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub nick: String,
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default = "default_network")]
    pub network: String,
    pub api_url: String,
    /// Where the per-alias relay queues live.
    pub home: PathBuf,
    #[serde(default)]
    pub alias_file: Option<PathBuf>,
    #[serde(default, rename = "alias")]
    pub aliases: Vec<AliasEntry>,
}

fn default_port() -> u16 {
    6667
}

fn default_network() -> String {
    "irc".into()
}

impl BotConfig {
    /// Reads the config and, if named, the alias file (resolved relative to
    /// the config's directory).
    pub fn load(path: &Path) -> Result<(BotConfig, AliasMap), BotConfigError> {
        let cfg: BotConfig = read_toml(path)?;
        let mut entries = cfg.aliases.clone();
        if let Some(file) = &cfg.alias_file {
            let file = path.parent().map_or_else(|| file.clone(), |dir| dir.join(file));
            entries.extend(read_toml::<AliasFile>(&file)?.aliases);
        }
        let map = AliasMap::new(entries)?;
        Ok((cfg, map))
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, BotConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| BotConfigError::Read { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| BotConfigError::Parse { path: path.into(), message: e.to_string() })
}

/// IRC nick to developer, one network. IRC nicks compare case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct AliasMap {
    by_nick: BTreeMap<String, AliasEntry>,
}

impl AliasMap {
    pub fn new(entries: impl IntoIterator<Item = AliasEntry>) -> Result<AliasMap, BotConfigError> {
        let mut by_nick = BTreeMap::new();
        for mut e in entries {
            e.irc_nick = e.irc_nick.trim().to_ascii_lowercase();
            if e.irc_nick.is_empty() || e.relay_token.trim().is_empty() {
                return Err(BotConfigError::Invalid("alias entries need irc_nick and relay_token".into()));
            }
            let key = e.irc_nick.clone();
            if by_nick.insert(key.clone(), e).is_some() {
                return Err(BotConfigError::Invalid(format!("irc nick {key} is mapped twice")));
            }
        }
        Ok(AliasMap { by_nick })
    }

    pub fn get(&self, irc_nick: &str) -> Option<&AliasEntry> {
        self.by_nick.get(&irc_nick.to_ascii_lowercase())
    }

    pub fn entries(&self) -> impl Iterator<Item = &AliasEntry> {
        self.by_nick.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Ignore,
    Relay { alias: AliasEntry, text: String, reply_to: String },
    Reply { to: String, text: String },
}

/// `<botnick>: shout <text>` in a channel, `shout <text>` in private.
fn command_text<'a>(bot_nick: &str, target: &str, text: &'a str) -> Option<&'a str> {
    let text = text.trim_start();
    let body = if irc::is_channel(target) {
        let head = text.get(..bot_nick.len())?;
        if !head.eq_ignore_ascii_case(bot_nick) {
            return None;
        }
        text[bot_nick.len()..].strip_prefix([':', ','])?.trim_start()
    } else {
        text
    };
    let word = body.get(..5)?;
    if !word.eq_ignore_ascii_case("shout") {
        return None;
    }
    let rest = &body[5..];
    if rest.is_empty() || rest.starts_with(char::is_whitespace) {
        Some(rest)
    } else {
        None
    }
}

pub fn handle_message(bot_nick: &str, aliases: &AliasMap, from: &str, target: &str, text: &str) -> Decision {
    let Some(rest) = command_text(bot_nick, target, text) else {
        return Decision::Ignore;
    };
    let reply_to = from.to_string();
    let Some(alias) = aliases.get(from) else {
        return Decision::Reply {
            to: reply_to,
            text: format!("sorry {from}, this nick is not linked to a developer; ask an admin to map it"),
        };
    };
    match normalize_shout_text(rest) {
        Ok(text) => Decision::Relay { alias: alias.clone(), text, reply_to },
        Err(TextError::EmptyShout) => Decision::Reply { to: reply_to, text: "error: empty shout, nothing logged".into() },
        Err(e) => Decision::Reply { to: reply_to, text: format!("error: {e}") },
    }
}

/// Delivers relayed text through one client queue per alias.
pub struct Relay {
    pub home: PathBuf,
    pub network: String,
    pub api_url: String,
}

impl Relay {
    fn queue_dir(&self, alias: &AliasEntry) -> PathBuf {
        self.home.join("queues").join(format!("{}-{}", self.network, alias.irc_nick))
    }

    fn client(&self, alias: &AliasEntry, now: aa_core::Timestamp) -> Result<Client<HttpTransport>, ClientError> {
        let queue = ClientQueue::open(&self.queue_dir(alias), None, now)?;
        let mut client = Client::new(queue, HttpTransport::new(&self.api_url, &alias.relay_token));
        client.origin = Origin::Bot;
        Ok(client)
    }

    /// Relays and returns the reply for the sender.
    pub fn relay(&self, alias: &AliasEntry, text: &str, now: aa_core::Timestamp) -> String {
        let outcome = self.client(alias, now).and_then(|mut c| c.shout(text, now));
        match outcome {
            Ok(ShoutStatus::Sent) => format!("logged for {}", alias.developer),
            Ok(ShoutStatus::Queued) => "server unreachable; queued and will retry".into(),
            Err(e) => format!("error: {e}"),
        }
    }

    /// Pushes every alias queue; returns how many entries are still queued.
    pub fn flush(&self, aliases: &AliasMap, now: aa_core::Timestamp) -> usize {
        let mut remaining = 0;
        for alias in aliases.entries() {
            if !self.queue_dir(alias).join(crate::client::queue::QUEUE_FILE).exists() {
                continue;
            }
            match self.client(alias, now).and_then(|mut c| c.push(now)) {
                Ok(r) => remaining += r.remaining,
                Err(e) => warn!(alias = %alias.irc_nick, error = %e, "flushing relay queue failed"),
            }
        }
        remaining
    }
}

/// Reconnect delays: 1 s, doubling, capped at 5 min.
#[derive(Debug, Clone)]
pub struct Backoff {
    next: Duration,
}

pub const BACKOFF_START: Duration = Duration::from_secs(1);
pub const BACKOFF_CAP: Duration = Duration::from_secs(300);

impl Default for Backoff {
    fn default() -> Self {
        Backoff { next: BACKOFF_START }
    }
}

impl Backoff {
    pub fn next_delay(&mut self) -> Duration {
        let d = self.next;
        self.next = (self.next * 2).min(BACKOFF_CAP);
        d
    }

    pub fn reset(&mut self) {
        self.next = BACKOFF_START;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    /// The server closed the connection or it failed.
    Disconnected { registered: bool },
    Stopped,
}

const FLUSH_EVERY: Duration = Duration::from_secs(30);

pub struct Bot {
    pub cfg: BotConfig,
    pub aliases: AliasMap,
    pub relay: Relay,
}

impl Bot {
    pub fn new(cfg: BotConfig, aliases: AliasMap) -> Bot {
        let relay = Relay { home: cfg.home.clone(), network: cfg.network.clone(), api_url: cfg.api_url.clone() };
        Bot { cfg, aliases, relay }
    }

    /// Runs one connection until it drops or `stop` is set.
    pub fn run_connection(&self, stream: TcpStream, clock: &dyn Clock, stop: &AtomicBool) -> std::io::Result<SessionEnd> {
        stream.set_read_timeout(Some(Duration::from_millis(200)))?;
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        let mut nick = self.cfg.nick.clone();
        write!(writer, "NICK {nick}\r\nUSER {nick} 0 * :AA relay bot\r\n")?;
        let mut registered = false;
        let mut last_flush = Instant::now();
        let mut line = Vec::new();
        loop {
            if stop.load(Ordering::SeqCst) {
                let _ = writer.write_all(b"QUIT :shutting down\r\n");
                self.relay.flush(&self.aliases, clock.now());
                return Ok(SessionEnd::Stopped);
            }
            if last_flush.elapsed() >= FLUSH_EVERY {
                self.relay.flush(&self.aliases, clock.now());
                last_flush = Instant::now();
            }
            match reader.read_until(b'\n', &mut line) {
                Ok(0) => return Ok(SessionEnd::Disconnected { registered }),
                Ok(_) if !line.ends_with(b"\n") => continue,
                Ok(_) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
                Err(_) => return Ok(SessionEnd::Disconnected { registered }),
            }
            let text = String::from_utf8_lossy(&line).into_owned();
            line.clear();
            let Some(msg) = Message::parse(&text) else { continue };
            match msg.command.as_str() {
                "PING" => {
                    let token = msg.params.first().map(String::as_str).unwrap_or("");
                    write!(writer, "PONG :{token}\r\n")?;
                }
                "001" => {
                    registered = true;
                    info!(server = %self.cfg.server, nick = %nick, "registered");
                    for ch in &self.cfg.channels {
                        write!(writer, "JOIN {ch}\r\n")?;
                    }
                    self.relay.flush(&self.aliases, clock.now());
                }
                "433" => {
                    nick.push('_');
                    write!(writer, "NICK {nick}\r\n")?;
                }
                "PRIVMSG" if msg.params.len() >= 2 => {
                    let Some(from) = msg.nick() else { continue };
                    match handle_message(&nick, &self.aliases, from, &msg.params[0], &msg.params[1]) {
                        Decision::Ignore => {}
                        Decision::Reply { to, text } => writer.write_all(irc::privmsg(&to, &text).as_bytes())?,
                        Decision::Relay { alias, text, reply_to } => {
                            let reply = self.relay.relay(&alias, &text, clock.now());
                            info!(from, developer = %alias.developer, %reply, "relayed shout");
                            writer.write_all(irc::privmsg(&reply_to, &reply).as_bytes())?;
                        }
                    }
                }
                _ => {}
            }
        }
    }

    /// Connects and reconnects with backoff until `stop` is set.
    pub fn run(&self, clock: &dyn Clock, stop: &AtomicBool, sleep: &mut dyn FnMut(Duration)) {
        let mut backoff = Backoff::default();
        while !stop.load(Ordering::SeqCst) {
            let addr = format!("{}:{}", self.cfg.server, self.cfg.port);
            let end = TcpStream::connect(&addr).and_then(|s| self.run_connection(s, clock, stop));
            match end {
                Ok(SessionEnd::Stopped) => return,
                Ok(SessionEnd::Disconnected { registered }) => {
                    if registered {
                        backoff.reset();
                    }
                    warn!(%addr, "disconnected");
                }
                Err(e) => warn!(%addr, error = %e, "connection failed"),
            }
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let delay = backoff.next_delay();
            info!(?delay, "reconnecting");
            sleep(delay);
        }
        self.relay.flush(&self.aliases, clock.now());
    }
}
