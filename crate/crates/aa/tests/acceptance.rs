//! End-to-end acceptance suite. Each criterion runs under its own time limit
//! and reports one PASS or FAIL line; run with `--nocapture` to see them.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::AtomicBool;
use std::thread;
use std::time::{Duration, Instant};

use aa::bot::{AliasEntry, AliasMap, Bot, BotConfig};
use aa::client::ClientQueue;
use aa::journal::{Durability, Recovery};
use aa::service::ServiceConfig;
use aa::store::{AssignRecord, DeveloperRecord, Entry, NewShout, ScreencastRecord, Store, StoreOptions, VerdictRecord};
use aa::ts::{Clock, ManualClock, SystemClock};
use aa_core::{group_sessions, session_id, IdemKey, NickName, Origin, Shout, TimeslotConfig, Timestamp, Verdict, Window};
use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

type Check = fn();

const CRITERIA: [(&str, u64, Check); 8] = [
    ("sample feed round-trip over HTTP", 5, sample_feed_round_trip),
    ("grouping matches the consecutive-gap oracle", 30, grouping_oracle),
    ("validator assignment", 30, validator_assignment),
    ("offline shouts delivered exactly once", 10, offline_exactly_once),
    ("crash replay is deterministic", 20, crash_replay),
    ("verdict state machine", 5, verdict_state_machine),
    ("bot relays only mapped nicks", 10, bot_relay),
    ("analytics stable across restart", 5, analytics_determinism),
];

#[test]
fn acceptance() {
    let started = Instant::now();
    let mut failed = Vec::new();
    for (name, limit, check) in CRITERIA {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let took = t.elapsed();
        let problem = match outcome {
            Err(payload) => Some(panic_text(&payload)),
            Ok(()) if took > Duration::from_secs(limit) => Some(format!("took longer than {limit}s")),
            Ok(()) => None,
        };
        match &problem {
            None => println!("PASS  {name}  ({:.2}s, limit {limit}s)", took.as_secs_f64()),
            Some(why) => {
                println!("FAIL  {name}  ({:.2}s, limit {limit}s): {why}", took.as_secs_f64());
                failed.push(name);
            }
        }
    }
    let total = started.elapsed();
    println!("total {:.2}s, limit 120s", total.as_secs_f64());
    assert!(failed.is_empty(), "failed: {failed:?}");
    assert!(total < Duration::from_secs(120));
}

fn panic_text(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else {
        "panic".into()
    }
}

fn day_27() -> Window {
    Window::new(ts("2013-05-27T00:00:00Z"), ts("2013-05-28T00:00:00Z")).unwrap()
}

fn sample_feed_round_trip() {
    let h = Harness::sample_team(after_sample()).serve();
    post_sample_feed(&h);

    let (status, page) = get(&format!("{}/api/feed?limit=100", h.url()));
    assert_eq!(status, 200);
    let entries = page["entries"].as_array().unwrap();
    let rows = aa::fixture::sample_feed();
    assert_eq!(entries.len(), 16);
    for (e, row) in entries.iter().zip(&rows) {
        assert_eq!(e["author"], row.nick);
        assert_eq!(e["text"], row.text);
        assert_eq!(e["client_ts"], serde_json::to_value(row.at).unwrap());
    }
    assert_eq!(entries[0]["author"], "hybrid");
    assert_eq!(entries[0]["client_ts"], serde_json::to_value(ts("2013-05-28T12:06:00Z")).unwrap());

    let (status, sessions) =
        get(&format!("{}/api/sessions?author=v1z&from=2013-05-27T00:00:00Z&to=2013-05-28T00:00:00Z", h.url()));
    assert_eq!(status, 200);
    let sessions = sessions.as_array().unwrap();
    assert_eq!(sessions.len(), 1);
    assert_eq!(sessions[0]["shout_count"], 7);
    assert_eq!(sessions[0]["duration_s"], 9300);
}

const START: &str = "session: start";
const STOP: &str = "session: stop";

fn corpus(rng: &mut StdRng, gap: i64) -> Vec<Shout> {
    let n = if rng.random_ratio(1, 10) { 2000 } else { rng.random_range(0..=2000) };
    let author = NickName::parse("dev").unwrap();
    let mut ids: Vec<u64> = (1..=n as u64).map(|i| i * 3 + rng.random_range(0..3)).collect();
    ids.shuffle(rng);
    let mut t = 1_400_000_000i64;
    let mut out = Vec::with_capacity(n);
    for id in ids {
        t += match rng.random_range(0..8) {
            0 => 0,
            1 => gap,
            2 => gap + 1,
            3 => gap - 1,
            4 => rng.random_range(gap..gap * 4),
            _ => rng.random_range(0..gap / 2),
        };
        let text = match rng.random_range(0..40) {
            0 | 1 => START,
            2 | 3 => STOP,
            4 => "session: starting over",
            _ => "work",
        };
        out.push(Shout {
            id,
            author: author.clone(),
            text: text.to_string(),
            client_ts: Timestamp::from_unix(t),
            server_ts: Timestamp::from_unix(1_500_000_000 + rng.random_range(0..50)),
            origin: Origin::Cli,
            idem_key: IdemKey { client_id: "c".into(), seq: id },
        });
    }
    out.shuffle(rng);
    out
}

/// Work order: client time, then receipt time, then id.
fn work_order(shouts: &[Shout]) -> Vec<&Shout> {
    let by_key: BTreeMap<(i64, i64, u64), &Shout> =
        shouts.iter().map(|s| ((s.client_ts.unix(), s.server_ts.unix(), s.id), s)).collect();
    by_key.into_values().collect()
}

/// Whether a new session must begin at position `i` of the work order.
fn opens_session(seq: &[&Shout], i: usize, gap: i64) -> bool {
    i == 0
        || seq[i].text == START
        || seq[i - 1].text == STOP
        || seq[i].client_ts.unix() - seq[i - 1].client_ts.unix() > gap
}

fn oracle_sessions(shouts: &[Shout], gap: i64) -> Vec<Vec<u64>> {
    let seq = work_order(shouts);
    let mut out: Vec<Vec<u64>> = Vec::new();
    for i in 0..seq.len() {
        if opens_session(&seq, i, gap) {
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(seq[i].id);
    }
    out
}

fn expected_id(author: &str, first: u64) -> String {
    let mut h = Sha256::new();
    h.update(author.as_bytes());
    h.update([0]);
    h.update(first.to_be_bytes());
    h.finalize()[..12].iter().map(|b| format!("{b:02x}")).collect()
}

fn grouping_oracle() {
    let mut rng = StdRng::seed_from_u64(0x5e55_1045);
    for case in 0..1000 {
        let gap_min = rng.random_range(2..=180);
        let cfg = TimeslotConfig::new(1, gap_min).unwrap();
        let gap = cfg.session_gap_secs();
        let shouts = corpus(&mut rng, gap);
        let by_id: BTreeMap<u64, &Shout> = shouts.iter().map(|s| (s.id, s)).collect();
        let got = group_sessions(&shouts, &cfg).unwrap();

        let want = oracle_sessions(&shouts, gap);
        let got_ids: Vec<Vec<u64>> = got.iter().map(|s| s.shout_ids.clone()).collect();
        assert_eq!(got_ids, want, "case {case}: partition differs from oracle");

        let mut seen = BTreeSet::new();
        for (k, s) in got.iter().enumerate() {
            let first = by_id[&s.shout_ids[0]];
            let last = by_id[s.shout_ids.last().unwrap()];
            assert_eq!(s.session_id, expected_id("dev", first.id), "case {case}");
            assert_eq!((s.started_at, s.ended_at), (first.client_ts, last.client_ts), "case {case}");
            assert_eq!(s.stopped_by_marker, last.text == STOP, "case {case}");
            let ts: Vec<Timestamp> = s.shout_ids.iter().map(|id| by_id[id].client_ts).collect();
            assert_eq!(s.shout_ts, ts, "case {case}");
            for w in ts.windows(2) {
                assert!((0..=gap).contains(&(w[1] - w[0])), "case {case}: gap inside a session");
            }
            for id in &s.shout_ids[1..] {
                assert_ne!(by_id[id].text, START, "case {case}: start marker inside a session");
            }
            for id in &s.shout_ids[..s.len() - 1] {
                assert_ne!(by_id[id].text, STOP, "case {case}: stop marker inside a session");
            }
            if let Some(prev) = k.checked_sub(1).map(|p| &got[p]) {
                let split_by_gap = s.started_at - prev.ended_at > gap;
                assert!(split_by_gap || first.text == START || prev.stopped_by_marker, "case {case}: needless split");
            }
            for id in &s.shout_ids {
                assert!(seen.insert(*id), "case {case}: shout {id} in two sessions");
            }
        }
        assert_eq!(seen.len(), shouts.len(), "case {case}: shouts lost");

        // Small corpora: every pair shares a session exactly when no
        // boundary lies between them.
        if shouts.len() <= 150 {
            let seq = work_order(&shouts);
            let session_of: BTreeMap<u64, usize> =
                got.iter().enumerate().flat_map(|(k, s)| s.shout_ids.iter().map(move |id| (*id, k))).collect();
            for i in 0..seq.len() {
                let mut joined = true;
                for j in i + 1..seq.len() {
                    joined &= !opens_session(&seq, j, gap);
                    assert_eq!(session_of[&seq[i].id] == session_of[&seq[j].id], joined, "case {case}");
                }
            }
        }
    }
}

fn fast_opts() -> StoreOptions {
    StoreOptions { durability: Durability::OsBuffered, ..StoreOptions::default() }
}

/// Stores `count` shouts by `author`, each in its own closed session.
fn spaced_sessions(store: &mut Store, author: &NickName, start: Timestamp, count: usize, client: &str) {
    for i in 0..count {
        let new = NewShout {
            author: author.clone(),
            text: "work".into(),
            client_ts: start.plus_secs(i as i64 * 7200),
            origin: Origin::Http,
            idem_key: IdemKey { client_id: client.into(), seq: i as u64 },
        };
        store.ingest_shout(new, start).unwrap();
    }
}

fn validator_assignment() {
    let base = ts("2020-01-01T00:00:00Z");
    let cfg = ServiceConfig { rate_limit_per_min: 0, ..ServiceConfig::default() };

    // Random worlds until 10,000 assignments have been made.
    let mut rng = StdRng::seed_from_u64(11);
    let mut total = 0;
    let mut world = 0;
    while total < 10_000 {
        world += 1;
        let size = rng.random_range(2..=7);
        let names: Vec<String> = (0..size).map(|i| format!("w{world}d{i}")).collect();
        let roster: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "")).collect();
        let h = Harness::new(cfg.clone(), &roster, base);
        let inactive = &names[rng.random_range(0..size)];
        aa::admin::set_active(&mut h.svc().write(), &nick(inactive), false, base).unwrap();
        {
            let mut store = h.svc().write();
            for (k, n) in names.iter().enumerate() {
                let count = rng.random_range(0..400);
                spaced_sessions(&mut store, &nick(n), base.plus_secs(k as i64), count, n);
            }
        }
        let now = base.plus_secs(400 * 7200 + 86_400);
        let report = h.svc().close_and_assign(now, &mut rng).unwrap();
        for a in &report.assigned {
            assert_ne!(a.author, a.validator, "self-validation");
            assert_ne!(a.validator.as_str(), inactive, "inactive validator");
        }
        total += report.assigned.len();
    }

    // One author, three eligible validators, one inactive developer.
    let roster = [("author", ""), ("va", ""), ("vb", ""), ("vc", ""), ("away", "")];
    let h = Harness::new(cfg.clone(), &roster, base);
    aa::admin::set_active(&mut h.svc().write(), &nick("away"), false, base).unwrap();
    spaced_sessions(&mut h.svc().write(), &nick("author"), base, 9000, "author");
    let report = h.svc().close_and_assign(base.plus_secs(9000 * 7200), &mut StdRng::seed_from_u64(2024)).unwrap();
    assert_eq!(report.assigned.len(), 9000);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in &report.assigned {
        *counts.entry(a.validator.to_string()).or_default() += 1;
    }
    assert_eq!(counts.keys().map(String::as_str).collect::<Vec<_>>(), ["va", "vb", "vc"]);
    for (v, n) in &counts {
        assert!((2800..=3200).contains(n), "{v} drew {n} of 9000");
    }

    // Repeated and overlapping scans assign each session once.
    let roster = [("ana", ""), ("bia", ""), ("caio", "")];
    let h = Harness::new(cfg, &roster, base);
    for (k, n) in ["ana", "bia", "caio"].iter().enumerate() {
        spaced_sessions(&mut h.svc().write(), &nick(n), base.plus_secs(k as i64), 200, n);
    }
    let now = base.plus_secs(200 * 7200 + 86_400);
    let made: usize = thread::scope(|s| {
        let workers: Vec<_> = (0..4)
            .map(|seed| {
                let svc = h.svc().clone();
                s.spawn(move || svc.close_and_assign(now, &mut StdRng::seed_from_u64(seed)).unwrap().assigned.len())
            })
            .collect();
        workers.into_iter().map(|w| w.join().unwrap()).sum()
    });
    assert_eq!(made, 600);
    for _ in 0..3 {
        assert!(h.svc().close_and_assign(now, &mut rng).unwrap().assigned.is_empty());
    }
    let store = h.svc().read();
    let sessions: Vec<String> = store.state().assignments().map(|a| a.session_id.clone()).collect();
    assert_eq!(sessions.len(), 600);
    assert_eq!(sessions.iter().collect::<BTreeSet<_>>().len(), 600);
}

/// Reads one HTTP/1.1 message (headers plus a `content-length` body).
fn read_message(r: &mut impl BufRead) -> Option<Vec<u8>> {
    let mut raw = Vec::new();
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if r.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
        raw.extend_from_slice(line.as_bytes());
        if line == "\r\n" {
            break;
        }
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body).ok()?;
    raw.extend(body);
    Some(raw)
}

/// An HTTP relay in front of `upstream` that forwards the shout post after
/// the first `healthy` ones and then hangs up instead of answering, once.
fn lossy_proxy(upstream: SocketAddr, healthy: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        let mut shouts = 0;
        for conn in listener.incoming() {
            let mut client = conn.unwrap();
            let mut input = BufReader::new(client.try_clone().unwrap());
            while let Some(req) = read_message(&mut input) {
                let mut up = TcpStream::connect(upstream).unwrap();
                up.write_all(&req).unwrap();
                let resp = read_message(&mut BufReader::new(up)).unwrap();
                if req.starts_with(b"POST /api/shouts ") {
                    shouts += 1;
                    if shouts == healthy + 1 {
                        break;
                    }
                }
                client.write_all(&resp).unwrap();
            }
        }
    });
    url
}

fn offline_exactly_once() {
    let cfg = ServiceConfig { rate_limit_per_min: 0, ..ServiceConfig::default() };
    let h = Harness::new(cfg, &[("v1z", "")], Timestamp::from_unix(0)).serve();
    h.clock.set(SystemClock.now());
    let token = h.token("v1z").to_string();
    let home = tempfile::tempdir().unwrap();
    let home = home.path();

    let down = dead_server();
    for i in 0..50 {
        let o = aa(home, Some(&down), Some(&token), &["shout", &format!("offline entry {i:02}")]);
        assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), "queued (offline)"));
    }
    let local = ClientQueue::snapshot(home).unwrap();
    assert_eq!(local.depth(), 50);

    let proxy = lossy_proxy(h.server.as_ref().unwrap().addr, 20);
    let o = aa(home, Some(&proxy), Some(&token), &["push"]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(1), r#"{"sent":20,"remaining":30}"#));
    assert_eq!(h.svc().read().state().shout_count(), 21, "the lost answer's shout is stored");
    let o = aa(home, Some(&proxy), Some(&token), &["push"]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), r#"{"sent":30,"remaining":0}"#));

    let (_, page) = get(&format!("{}/api/feed?limit=500", h.url()));
    let mut feed: Vec<Value> = page["entries"].as_array().unwrap().clone();
    feed.reverse();
    assert_eq!(feed.len(), 50);
    for (e, l) in feed.iter().zip(&local.entries) {
        assert_eq!(e["text"], l.text.as_str());
        assert_eq!(e["client_ts"], serde_json::to_value(l.client_ts).unwrap());
    }
}

/// Appends a seeded mix of every record kind until the journal holds
/// exactly `total` records.
fn mixed_journal(store: &mut Store, total: u64, rng: &mut StdRng) {
    let now = ts("2024-06-01T00:00:00Z");
    let devs: Vec<NickName> = (0..6).map(|i| nick(&format!("dev{i}"))).collect();
    for d in &devs {
        aa::admin::add_developer(store, d, "", now).unwrap();
    }
    let mut shouts: Vec<(NickName, u64)> = Vec::new();
    let mut open_tokens: Vec<String> = Vec::new();
    let mut t = now;
    while store.journal_seq() < total {
        t = t.plus_secs(rng.random_range(0..900));
        let author = devs[rng.random_range(0..devs.len())].clone();
        let pick = rng.random_range(0..100);
        let entry = if pick < 8 {
            Entry::DeveloperUpsert(DeveloperRecord {
                nick: author.clone(),
                token_sha256: aa::secret::digest(&aa::secret::new_token()),
                aliases: Vec::new(),
                notify_address: format!("mailto:{author}@lab.example"),
                active: rng.random_ratio(4, 5),
            })
        } else if pick < 15 && !shouts.is_empty() {
            let (who, id) = shouts[rng.random_range(0..shouts.len())].clone();
            Entry::ScreencastAttach(ScreencastRecord {
                session_id: session_id(&who, id),
                author: who,
                url: format!("https://video.example/{}", rng.random::<u32>()),
            })
        } else if pick < 25 && !shouts.is_empty() {
            let (who, id) = shouts[rng.random_range(0..shouts.len())].clone();
            let sid = session_id(&who, id);
            if store.state().assignment_for_session(&sid).is_some() {
                continue;
            }
            let validator = devs.iter().find(|d| **d != who).unwrap().clone();
            let token = aa::secret::new_token();
            open_tokens.push(token.clone());
            Entry::ValidationAssign(AssignRecord {
                session_id: sid,
                author: who,
                validator,
                token_sha256: aa::secret::digest(&token),
                assigned_at: t,
            })
        } else if pick < 30 && !open_tokens.is_empty() {
            let token = open_tokens.swap_remove(rng.random_range(0..open_tokens.len()));
            Entry::ValidationVerdict(VerdictRecord {
                token_sha256: aa::secret::digest(&token),
                verdict: if rng.random() { Verdict::Valid } else { Verdict::Invalid },
                comment: rng.random::<bool>().then(|| "checked the screencast".into()),
                decided_at: t,
            })
        } else {
            let new = NewShout {
                author: author.clone(),
                text: if rng.random_ratio(1, 20) { STOP.into() } else { format!("step {}", store.journal_seq()) },
                client_ts: t.plus_secs(-rng.random_range(0..120)),
                origin: Origin::Cli,
                idem_key: IdemKey { client_id: format!("{author}-laptop"), seq: store.journal_seq() },
            };
            let s = store.ingest_shout(new, t).unwrap();
            shouts.push((s.author, s.id));
            continue;
        };
        store.append(t, entry).unwrap();
    }
}

fn crash_replay() {
    let data = tempfile::tempdir().unwrap();
    let journal = aa::server::journal_path(data.path());
    let before = {
        let mut store = Store::open(&journal, fast_opts()).unwrap();
        mixed_journal(&mut store, 5000, &mut StdRng::seed_from_u64(5000));
        assert_eq!(store.journal_seq(), 5000);
        store.state().fingerprint()
    };

    let port = free_port();
    let url = format!("http://127.0.0.1:{port}");
    let views = || {
        (
            get(&format!("{url}/api/feed?limit=500")).1,
            get(&format!("{url}/api/sessions")).1,
            get(&format!("{url}/api/stats/team?from=2024-06-01&to=2024-08-01")).1,
        )
    };
    let mut server = spawn_serve(data.path(), port, &["--scan-interval", "3600"]);
    assert_eq!(wait_healthy(&url)["journal_seq"], 5000);
    let seen = views();
    server.kill().unwrap();
    server.wait().unwrap();

    let mut server = spawn_serve(data.path(), port, &["--scan-interval", "3600"]);
    assert_eq!(wait_healthy(&url)["journal_seq"], 5000);
    assert!(views() == seen, "restarted server answers differently");
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(Store::rebuild(&journal).unwrap().fingerprint() == before, "rebuilt state differs");

    std::fs::OpenOptions::new().append(true).open(&journal).unwrap().write_all(b"{\"v\":1,\"seq\":5001,\"kind\":\"sh").unwrap();
    assert!(Store::rebuild(&journal).is_err(), "torn record accepted silently");
    assert!(Store::open(&journal, fast_opts()).is_err());
    let opts = StoreOptions { recovery: Recovery::DropTornTail, ..fast_opts() };
    let recovered = Store::open(&journal, opts).unwrap();
    assert_eq!(recovered.journal_seq(), 5000);
    assert!(recovered.state().fingerprint() == before, "recovered state differs");
    drop(recovered);
    let decoded = aa::journal::read_all::<Entry>(&journal).unwrap();
    assert!(!decoded.torn_tail);
    assert_eq!(decoded.records.len(), 5000);
}

fn verdict_state_machine() {
    let now = ts("2024-03-01T10:00:00Z");
    let h = Harness::new(ServiceConfig::default(), &[("ana", ""), ("bia", "")], now).serve();
    let body = shout_body(h.token("ana"), "profiled the parser", now.plus_minutes(-90), "ana-c", 1);
    assert_eq!(post(&format!("{}/api/shouts", h.url()), &body).0, 201);
    let report = h.svc().close_and_assign(now, &mut StdRng::seed_from_u64(1)).unwrap();
    assert_eq!(report.assigned.len(), 1);
    let a = &report.assigned[0];
    let url = format!("{}/api/validations/{}", h.url(), a.token);
    let state = || get(&format!("{}/api/sessions/{}", h.url(), a.session_id)).1["validation_state"].clone();

    assert_eq!(post(&url, &json!({"verdict": "maybe"})).0, 422);
    assert_eq!(state(), "assigned");
    assert_eq!(post(&format!("{}/api/validations/not-a-token", h.url()), &json!({"verdict": "valid"})).0, 404);
    assert_eq!(post(&url, &json!({"verdict": "valid"})).0, 200);
    assert_eq!(post(&url, &json!({"verdict": "invalid"})).0, 409);
    assert_eq!(state(), "valid");
}

fn bot_relay() {
    let h = Harness::sample_team(after_sample()).serve();
    let relay_token = aa::admin::add_alias(&mut h.svc().write(), &nick("filter0"), "irc", "f0", after_sample()).unwrap();
    let aliases = AliasMap::new([AliasEntry { irc_nick: "f0".into(), developer: nick("filter0"), relay_token }]).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let home = tempfile::tempdir().unwrap();
    let cfg = BotConfig {
        server: "127.0.0.1".into(),
        port,
        nick: "aabot".into(),
        channels: vec!["#lab".into()],
        network: "irc".into(),
        api_url: h.url(),
        home: home.path().into(),
        alias_file: None,
        aliases: Vec::new(),
    };
    let bot = Bot::new(cfg, aliases);
    let script = thread::spawn(move || {
        let mut irc = Peer::accept(&listener);
        irc.register();
        irc.send(":mallory!m@h PRIVMSG aabot :shout forged entry");
        irc.expect("PRIVMSG mallory :");
        irc.send(":f0!f@h PRIVMSG aabot :shout X");
        irc.expect("PRIVMSG f0 :");
    });
    let clock = ManualClock::new(after_sample());
    bot.run_connection(TcpStream::connect(("127.0.0.1", port)).unwrap(), &clock, &AtomicBool::new(false)).unwrap();
    script.join().unwrap();

    let (_, page) = get(&format!("{}/api/feed", h.url()));
    let entries = page["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!((&entries[0]["author"], &entries[0]["text"]), (&json!("filter0"), &json!("X")));
}

fn analytics_determinism() {
    let mut h = Harness::sample_team(after_sample()).serve();
    post_sample_feed(&h);
    let stats = h.svc().compute_stats("v1z", day_27()).unwrap();
    assert_eq!((stats.sessions_count, stats.shouts_count), (1, 7));
    assert_eq!(stats.mean_session_duration_s, 9300.0);
    let before = serde_json::to_vec(&stats).unwrap();
    h.restart();
    assert_eq!(serde_json::to_vec(&h.svc().compute_stats("v1z", day_27()).unwrap()).unwrap(), before);
}
