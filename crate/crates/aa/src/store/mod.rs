//! Durable server state, rebuilt by replaying an append-only journal.
//!
//! Every mutation is validated against the current [`State`], written to the
//! journal, and only then applied. Replaying the same journal always yields
//! the same state, so the on-disk file is the single source of truth.

mod records;
mod sessions;

use std::collections::BTreeMap;
use std::path::Path;

use aa_core::{IdemKey, NickName, Origin, Shout, Timestamp, ValidationState, Verdict};
use serde::Serialize;
use thiserror::Error;

use crate::journal::{self, Durability, Envelope, Journal, JournalError, Recovery};

pub use records::{AliasRecord, AssignRecord, DeveloperRecord, Entry, ScreencastRecord, ShoutRecord, VerdictRecord};
pub use sessions::SessionIndex;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate idempotency key, already stored as shout {existing_id}")]
    DuplicateIdemKey { existing_id: u64 },
    #[error("session {session_id} already has a validator")]
    AlreadyAssigned { session_id: String },
    #[error("validation already decided")]
    AlreadyDecided,
    #[error("unknown validation token")]
    UnknownToken,
    #[error("rejected {kind} record: {reason}")]
    Invalid { kind: &'static str, reason: String },
    #[error(transparent)]
    Journal(#[from] JournalError),
}

impl StoreError {
    pub(crate) fn invalid(kind: &'static str, reason: impl Into<String>) -> Self {
        StoreError::Invalid { kind, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Developer {
    pub nick: NickName,
    pub notify_address: String,
    pub active: bool,
    pub aliases: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum Credential {
    Primary { nick: NickName },
    Relay { nick: NickName, network: String, alias: String },
}

impl Credential {
    pub fn nick(&self) -> &NickName {
        match self {
            Credential::Primary { nick } | Credential::Relay { nick, .. } => nick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub session_id: String,
    pub author: NickName,
    pub validator: NickName,
    pub assigned_at: Timestamp,
    pub verdict: Option<Verdict>,
    pub comment: Option<String>,
    pub decided_at: Option<Timestamp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    NewestFirst,
    OldestFirst,
}

/// Shout query. `since`/`until` bound client time as `[since, until)`;
/// `before_id` restricts to shouts older (by receipt) than a feed cursor.
#[derive(Debug, Clone, Default)]
pub struct ShoutQuery {
    pub author: Option<NickName>,
    pub since: Option<Timestamp>,
    pub until: Option<Timestamp>,
    pub limit: Option<usize>,
    pub order: Order,
    pub before_id: Option<u64>,
}

/// Indexes folded from the journal. Serializes deterministically (ordered
/// maps only), which is what restart comparisons rely on.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct State {
    last_seq: u64,
    last_server_ts: Timestamp,
    /// Ascending by id.
    shouts: Vec<Shout>,
    by_author: BTreeMap<NickName, Vec<usize>>,
    idem: BTreeMap<String, BTreeMap<u64, u64>>,
    developers: BTreeMap<NickName, Developer>,
    credentials: BTreeMap<String, Credential>,
    aliases: BTreeMap<String, BTreeMap<String, NickName>>,
    screencasts: BTreeMap<String, String>,
    assignments: BTreeMap<String, Assignment>,
    assignment_by_session: BTreeMap<String, String>,
}

impl State {
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_server_ts(&self) -> Timestamp {
        self.last_server_ts
    }

    pub fn next_shout_id(&self) -> u64 {
        self.shouts.last().map_or(1, |s| s.id + 1)
    }

    pub fn shout_count(&self) -> usize {
        self.shouts.len()
    }

    pub fn shout(&self, id: u64) -> Option<&Shout> {
        self.shouts.binary_search_by_key(&id, |s| s.id).ok().map(|i| &self.shouts[i])
    }

    pub fn idem_lookup(&self, key: &IdemKey) -> Option<u64> {
        self.idem.get(&key.client_id)?.get(&key.seq).copied()
    }

    /// Every idempotency key seen, in key order.
    pub fn idem_keys(&self) -> impl Iterator<Item = IdemKey> + '_ {
        self.idem
            .iter()
            .flat_map(|(cid, seqs)| seqs.keys().map(move |seq| IdemKey { client_id: cid.clone(), seq: *seq }))
    }

    pub fn authors(&self) -> impl Iterator<Item = &NickName> {
        self.by_author.keys()
    }

    pub fn author_shout_count(&self, author: &NickName) -> usize {
        self.by_author.get(author).map_or(0, Vec::len)
    }

    pub fn shouts_by(&self, author: &NickName) -> impl Iterator<Item = &Shout> {
        self.by_author.get(author).into_iter().flatten().map(move |i| &self.shouts[*i])
    }

    pub fn developer(&self, nick: &NickName) -> Option<&Developer> {
        self.developers.get(nick)
    }

    pub fn developers(&self) -> impl Iterator<Item = &Developer> {
        self.developers.values()
    }

    pub fn active_developers(&self) -> Vec<NickName> {
        self.developers.values().filter(|d| d.active).map(|d| d.nick.clone()).collect()
    }

    /// Resolves a bearer token to its credential, if the owner is active.
    /// The current profile as a full upsert record, credentials included.
    pub fn developer_record(&self, nick: &NickName) -> Option<DeveloperRecord> {
        let dev = self.developers.get(nick)?;
        let mut token_sha256 = String::new();
        let mut aliases = Vec::new();
        for (digest, cred) in &self.credentials {
            match cred {
                Credential::Primary { nick: n } if n == nick => token_sha256 = digest.clone(),
                Credential::Relay { nick: n, network, alias } if n == nick => aliases.push(AliasRecord {
                    network: network.clone(),
                    alias: alias.clone(),
                    relay_token_sha256: digest.clone(),
                }),
                _ => {}
            }
        }
        aliases.sort_by(|a, b| (&a.network, &a.alias).cmp(&(&b.network, &b.alias)));
        Some(DeveloperRecord {
            nick: nick.clone(),
            token_sha256,
            aliases,
            notify_address: dev.notify_address.clone(),
            active: dev.active,
        })
    }

    pub fn authenticate(&self, token: &str) -> Option<&Credential> {
        let cred = self.credentials.get(&crate::secret::digest(token))?;
        self.developers.get(cred.nick()).filter(|d| d.active)?;
        Some(cred)
    }

    pub fn alias_owner(&self, network: &str, alias: &str) -> Option<&NickName> {
        self.aliases.get(network)?.get(alias)
    }

    pub fn screencast(&self, session_id: &str) -> Option<&str> {
        self.screencasts.get(session_id).map(String::as_str)
    }

    pub fn assignment(&self, token: &str) -> Option<&Assignment> {
        self.assignments.get(&crate::secret::digest(token))
    }

    pub fn assignment_for_session(&self, session_id: &str) -> Option<&Assignment> {
        self.assignments.get(self.assignment_by_session.get(session_id)?)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.values()
    }

    pub fn validation_state(&self, session_id: &str) -> ValidationState {
        match self.assignment_for_session(session_id) {
            None => ValidationState::Pending,
            Some(a) => match a.verdict {
                None => ValidationState::Assigned,
                Some(Verdict::Valid) => ValidationState::Valid,
                Some(Verdict::Invalid) => ValidationState::Invalid,
            },
        }
    }

    pub fn query_shouts(&self, q: &ShoutQuery) -> Vec<&Shout> {
        let matches = |s: &&Shout| {
            q.since.is_none_or(|t| s.client_ts >= t)
                && q.until.is_none_or(|t| s.client_ts < t)
                && q.before_id.is_none_or(|id| s.id < id)
        };
        let limit = q.limit.unwrap_or(usize::MAX);
        let pool: Box<dyn DoubleEndedIterator<Item = &Shout>> = match &q.author {
            Some(a) => Box::new(self.by_author.get(a).into_iter().flatten().map(|i| &self.shouts[*i])),
            None => Box::new(self.shouts.iter()),
        };
        match q.order {
            Order::NewestFirst => pool.rev().filter(matches).take(limit).collect(),
            Order::OldestFirst => pool.filter(matches).take(limit).collect(),
        }
    }

    /// Snapshot bytes for equality checks across restarts.
    pub fn fingerprint(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serializes")
    }

    /// Validates `entry` against the current state without changing it.
    pub fn check(&self, entry: &Entry) -> Result<(), StoreError> {
        match entry {
            Entry::Shout(r) => {
                let key = IdemKey { client_id: r.client_id.clone(), seq: r.client_seq };
                if let Some(existing_id) = self.idem_lookup(&key) {
                    return Err(StoreError::DuplicateIdemKey { existing_id });
                }
                if r.id < self.next_shout_id() {
                    return Err(StoreError::invalid("shout", format!("id {} is not above {}", r.id, self.next_shout_id() - 1)));
                }
                if r.server_ts < self.last_server_ts {
                    return Err(StoreError::invalid("shout", "server_ts went backwards"));
                }
            }
            Entry::DeveloperUpsert(r) => {
                if let Some(c) = self.credentials.get(&r.token_sha256) {
                    if c.nick() != &r.nick {
                        return Err(StoreError::invalid("developer_upsert", "token already issued to another developer"));
                    }
                }
                for a in &r.aliases {
                    if let Some(owner) = self.alias_owner(&a.network, &a.alias) {
                        if owner != &r.nick {
                            return Err(StoreError::invalid(
                                "developer_upsert",
                                format!("alias {}/{} belongs to {owner}", a.network, a.alias),
                            ));
                        }
                    }
                    if let Some(c) = self.credentials.get(&a.relay_token_sha256) {
                        if c.nick() != &r.nick {
                            return Err(StoreError::invalid("developer_upsert", "relay token already issued"));
                        }
                    }
                }
            }
            Entry::ScreencastAttach(_) => {}
            Entry::ValidationAssign(r) => {
                if self.assignment_by_session.contains_key(&r.session_id) {
                    return Err(StoreError::AlreadyAssigned { session_id: r.session_id.clone() });
                }
                if r.validator == r.author {
                    return Err(StoreError::invalid("validation_assign", "validator is the session author"));
                }
                if !self.developers.contains_key(&r.validator) {
                    return Err(StoreError::invalid("validation_assign", format!("unknown validator {}", r.validator)));
                }
                if self.assignments.contains_key(&r.token_sha256) {
                    return Err(StoreError::invalid("validation_assign", "token reused"));
                }
            }
            Entry::ValidationVerdict(r) => match self.assignments.get(&r.token_sha256) {
                None => return Err(StoreError::UnknownToken),
                Some(a) if a.verdict.is_some() => return Err(StoreError::AlreadyDecided),
                Some(_) => {}
            },
        }
        Ok(())
    }

    /// Applies a record that already passed [`State::check`].
    fn apply_checked(&mut self, seq: u64, entry: Entry) {
        self.last_seq = seq;
        match entry {
            Entry::Shout(r) => {
                let idx = self.shouts.len();
                self.idem.entry(r.client_id.clone()).or_default().insert(r.client_seq, r.id);
                self.by_author.entry(r.author.clone()).or_default().push(idx);
                self.last_server_ts = r.server_ts;
                self.shouts.push(Shout {
                    id: r.id,
                    author: r.author,
                    text: r.text,
                    client_ts: r.client_ts,
                    server_ts: r.server_ts,
                    origin: r.origin,
                    idem_key: IdemKey { client_id: r.client_id, seq: r.client_seq },
                });
            }
            Entry::DeveloperUpsert(r) => {
                self.credentials.retain(|_, c| c.nick() != &r.nick);
                for by_alias in self.aliases.values_mut() {
                    by_alias.retain(|_, owner| owner != &r.nick);
                }
                self.aliases.retain(|_, m| !m.is_empty());
                self.credentials.insert(r.token_sha256.clone(), Credential::Primary { nick: r.nick.clone() });
                for a in &r.aliases {
                    self.aliases.entry(a.network.clone()).or_default().insert(a.alias.clone(), r.nick.clone());
                    self.credentials.insert(
                        a.relay_token_sha256.clone(),
                        Credential::Relay { nick: r.nick.clone(), network: a.network.clone(), alias: a.alias.clone() },
                    );
                }
                self.developers.insert(
                    r.nick.clone(),
                    Developer {
                        nick: r.nick,
                        notify_address: r.notify_address,
                        active: r.active,
                        aliases: r.aliases.into_iter().map(|a| (a.network, a.alias)).collect(),
                    },
                );
            }
            Entry::ScreencastAttach(r) => {
                self.screencasts.insert(r.session_id, r.url);
            }
            Entry::ValidationAssign(r) => {
                self.assignment_by_session.insert(r.session_id.clone(), r.token_sha256.clone());
                self.assignments.insert(
                    r.token_sha256,
                    Assignment {
                        session_id: r.session_id,
                        author: r.author,
                        validator: r.validator,
                        assigned_at: r.assigned_at,
                        verdict: None,
                        comment: None,
                        decided_at: None,
                    },
                );
            }
            Entry::ValidationVerdict(r) => {
                let a = self.assignments.get_mut(&r.token_sha256).expect("checked");
                a.verdict = Some(r.verdict);
                a.comment = r.comment;
                a.decided_at = Some(r.decided_at);
            }
        }
    }

    pub fn apply(&mut self, seq: u64, entry: Entry) -> Result<(), StoreError> {
        self.check(&entry)?;
        self.apply_checked(seq, entry);
        Ok(())
    }

    /// Folds a record sequence into a fresh state.
    pub fn replay(path: &Path, records: Vec<Envelope<Entry>>) -> Result<State, StoreError> {
        let mut state = State::default();
        for rec in records {
            let prev = state.last_seq;
            state.apply(rec.seq, rec.entry).map_err(|e| JournalError::CorruptJournal {
                path: path.to_path_buf(),
                last_complete_seq: prev,
                reason: format!("record {} does not apply: {e}", rec.seq),
            })?;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StoreOptions {
    pub recovery: Recovery,
    pub durability: Durability,
}

/// A shout as submitted, before the server assigns id and receipt time.
#[derive(Debug, Clone)]
pub struct NewShout {
    pub author: NickName,
    pub text: String,
    pub client_ts: Timestamp,
    pub origin: Origin,
    pub idem_key: IdemKey,
}

/// The single writer over a journal plus its folded state.
#[derive(Debug)]
pub struct Store {
    journal: Journal,
    state: State,
}

impl Store {
    pub fn open(path: &Path, opts: StoreOptions) -> Result<Store, StoreError> {
        let (journal, records) = Journal::open::<Entry>(path, opts.recovery, opts.durability)?;
        let state = State::replay(path, records)?;
        Ok(Store { journal, state })
    }

    /// Rebuilds state from the file alone, independent of any open writer.
    pub fn rebuild(path: &Path) -> Result<State, StoreError> {
        let decoded = journal::read_all::<Entry>(path)?;
        if decoded.torn_tail {
            return Err(JournalError::CorruptJournal {
                path: path.to_path_buf(),
                last_complete_seq: decoded.records.last().map_or(0, |r| r.seq),
                reason: "torn final record".into(),
            }
            .into());
        }
        State::replay(path, decoded.records)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn journal_seq(&self) -> u64 {
        self.journal.last_seq()
    }

    pub fn path(&self) -> &Path {
        self.journal.path()
    }

    pub fn append(&mut self, written_at: Timestamp, entry: Entry) -> Result<u64, StoreError> {
        self.state.check(&entry)?;
        let seq = self.journal.append(written_at, &entry)?;
        self.state.apply_checked(seq, entry);
        Ok(seq)
    }

    /// Stores a shout, assigning the next id and a receipt time no earlier
    /// than any previous one.
    pub fn ingest_shout(&mut self, new: NewShout, now: Timestamp) -> Result<Shout, StoreError> {
        if let Some(existing_id) = self.state.idem_lookup(&new.idem_key) {
            return Err(StoreError::DuplicateIdemKey { existing_id });
        }
        let id = self.state.next_shout_id();
        let server_ts = now.max(self.state.last_server_ts);
        self.append(
            now,
            Entry::Shout(ShoutRecord {
                id,
                author: new.author,
                text: new.text,
                client_ts: new.client_ts,
                server_ts,
                origin: new.origin,
                client_id: new.idem_key.client_id,
                client_seq: new.idem_key.seq,
            }),
        )?;
        Ok(self.state.shout(id).expect("just stored").clone())
    }
}
