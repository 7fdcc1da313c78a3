#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Instant;
use std::sync::Arc;
use std::time::Duration;

use aa::admin;
use aa::api::BackgroundServer;
use aa::fixture::sample_feed_chronological;
use aa::server::{journal_path, open_service};
use aa::service::{Service, ServiceConfig};
use aa::store::{Store, StoreOptions};
use aa::ts::ManualClock;
use aa_core::{NickName, Timestamp};
use serde_json::{json, Value};
use tempfile::TempDir;

pub fn nick(s: &str) -> NickName {
    NickName::parse(s).unwrap()
}

pub fn ts(s: &str) -> Timestamp {
    aa::ts::parse(s).unwrap()
}

/// Shortly after the last sample row.
pub fn after_sample() -> Timestamp {
    ts("2013-05-28T13:00:00Z")
}

pub fn opts() -> StoreOptions {
    StoreOptions { durability: aa::journal::Durability::OsBuffered, ..StoreOptions::default() }
}

/// A service over a temporary data directory with a manual clock, and
/// optionally a live HTTP listener.
pub struct Harness {
    pub dir: TempDir,
    pub clock: ManualClock,
    pub cfg: ServiceConfig,
    svc: Option<Arc<Service>>,
    pub server: Option<BackgroundServer>,
    pub tokens: BTreeMap<String, String>,
}

impl Harness {
    /// Enrolls `team` as `(nick, notify_address)` pairs.
    pub fn new(cfg: ServiceConfig, team: &[(&str, &str)], now: Timestamp) -> Harness {
        let dir = tempfile::tempdir().unwrap();
        let mut tokens = BTreeMap::new();
        {
            let mut store = Store::open(&journal_path(dir.path()), opts()).unwrap();
            for (n, notify) in team {
                tokens.insert(n.to_string(), admin::add_developer(&mut store, &nick(n), notify, now).unwrap());
            }
        }
        let clock = ManualClock::new(now);
        let svc = open_service(dir.path(), cfg.clone(), opts(), Arc::new(clock.clone())).unwrap();
        Harness { dir, clock, cfg, svc: Some(svc), server: None, tokens }
    }

    pub fn sample_team(now: Timestamp) -> Harness {
        let team: Vec<(&str, &str)> = aa::fixture::SAMPLE_TEAM.iter().map(|n| (*n, "")).collect();
        Harness::new(ServiceConfig::default(), &team, now)
    }

    pub fn serve(mut self) -> Harness {
        self.server = Some(BackgroundServer::start(self.svc().clone(), None).unwrap());
        self
    }

    pub fn url(&self) -> String {
        self.server.as_ref().expect("server running").url()
    }

    pub fn token(&self, n: &str) -> &str {
        &self.tokens[n]
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.path().to_path_buf()
    }

    pub fn now(&self) -> Timestamp {
        aa::ts::Clock::now(&self.clock)
    }

    pub fn svc(&self) -> &Arc<Service> {
        self.svc.as_ref().expect("service open")
    }

    /// Stops the listener, drops the service, and reopens from the journal.
    pub fn restart(&mut self) {
        let had_server = self.server.take().is_some();
        let svc = self.svc.take().expect("service open");
        assert_eq!(Arc::strong_count(&svc), 1, "service still referenced");
        drop(svc);
        self.svc = Some(open_service(self.dir.path(), self.cfg.clone(), opts(), Arc::new(self.clock.clone())).unwrap());
        if had_server {
            self.server = Some(BackgroundServer::start(self.svc().clone(), None).unwrap());
        }
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

fn read(mut resp: ureq::http::Response<ureq::Body>) -> (u16, Value) {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap();
    let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
    (status, value)
}

pub fn get(url: &str) -> (u16, Value) {
    read(agent().get(url).call().unwrap())
}

pub fn post(url: &str, body: &Value) -> (u16, Value) {
    read(agent().post(url).send_json(body).unwrap())
}

pub fn post_raw(url: &str, body: &str) -> (u16, Value) {
    read(agent().post(url).header("content-type", "application/json").send(body).unwrap())
}

pub fn shout_body(token: &str, text: &str, client_ts: Timestamp, client_id: &str, seq: u64) -> Value {
    json!({
        "auth_token": token,
        "text": text,
        "client_ts": aa::ts::format(client_ts),
        "client_id": client_id,
        "seq": seq,
    })
}

/// Posts the sample rows oldest first through the HTTP API.
pub fn post_sample_feed(h: &Harness) {
    for (i, row) in sample_feed_chronological().iter().enumerate() {
        let body = shout_body(h.token(row.nick), row.text, row.at, &format!("sample-{}", row.nick), i as u64 + 1);
        let (status, ack) = post(&format!("{}/api/shouts", h.url()), &body);
        assert_eq!(status, 201, "{ack}");
    }
}

/// One side of a scripted IRC conversation.
pub struct Peer {
    out: TcpStream,
    input: BufReader<TcpStream>,
}

impl Peer {
    pub fn accept(listener: &TcpListener) -> Peer {
        let (stream, _) = listener.accept().unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Peer { out: stream.try_clone().unwrap(), input: BufReader::new(stream) }
    }

    pub fn send(&mut self, line: &str) {
        self.out.write_all(format!("{line}\r\n").as_bytes()).unwrap();
    }

    /// Reads until a line starting with `prefix`, returning it.
    pub fn expect(&mut self, prefix: &str) -> String {
        let mut line = String::new();
        loop {
            line.clear();
            assert!(self.input.read_line(&mut line).unwrap() > 0, "connection closed waiting for {prefix}");
            if line.starts_with(prefix) {
                return line.trim_end().to_string();
            }
        }
    }

    pub fn register(&mut self) {
        self.expect("NICK aabot");
        self.expect("USER aabot");
        self.send(":stub 001 aabot :Welcome");
        self.expect("JOIN #lab");
    }
}

pub fn dead_server() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    url
}

pub fn spawn_serve(data: &Path, port: u16, extra: &[&str]) -> Child {
    Command::new(env!("CARGO_BIN_EXE_aa-server"))
        .env("AA_DATA_DIR", data)
        .env("RUST_LOG", "warn")
        .args(["serve", "--listen", &format!("127.0.0.1:{port}"), "--no-fsync"])
        .args(extra)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap()
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

pub fn wait_healthy(url: &str) -> serde_json::Value {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        if let Ok(mut resp) = agent().get(&format!("{url}/api/health")).call() {
            if resp.status() == 200 {
                return serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
            }
        }
        assert!(Instant::now() < deadline, "server did not come up");
        std::thread::sleep(Duration::from_millis(50));
    }
}

pub fn aa(home: &Path, server: Option<&str>, token: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aa"));
    cmd.env_remove("AA_SERVER").env_remove("AA_TOKEN").env_remove("AA_CONFIG").env("AA_HOME", home);
    if let Some(s) = server {
        cmd.env("AA_SERVER", s);
    }
    if let Some(t) = token {
        cmd.env("AA_TOKEN", t);
    }
    cmd.args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

