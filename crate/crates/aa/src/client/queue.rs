//! The local shout queue: a journal of issued shouts and their delivery
//! outcomes, guarded by an exclusive lock so concurrent invocations run one
//! after another.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use aa_core::{Marker, Timestamp};
use rand::distr::{Alphanumeric, SampleString};
use serde::{Deserialize, Serialize};

use crate::journal::{self, Durability, Journal, JournalError, Recovery};

pub const QUEUE_FILE: &str = "queue.jsonl";
const LOCK_FILE: &str = "queue.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum QueueRecord {
    Init {
        client_id: String,
    },
    LocalShout {
        seq: u64,
        text: String,
        #[serde(with = "crate::ts")]
        client_ts: Timestamp,
    },
    Pushed {
        seq: u64,
        id: u64,
        #[serde(with = "crate::ts")]
        server_ts: Timestamp,
    },
    Rejected {
        seq: u64,
        code: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum EntryState {
    Queued,
    Pushed { id: u64 },
    Rejected { code: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalEntry {
    pub seq: u64,
    pub text: String,
    pub client_ts: Timestamp,
    pub state: EntryState,
}

/// The queue folded from its records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueueView {
    pub client_id: Option<String>,
    /// Ascending by seq.
    pub entries: Vec<LocalEntry>,
}

impl QueueView {
    pub fn fold(records: impl IntoIterator<Item = QueueRecord>) -> QueueView {
        let mut view = QueueView::default();
        records.into_iter().for_each(|r| view.apply(r));
        view
    }

    pub fn apply(&mut self, r: QueueRecord) {
        match r {
            QueueRecord::Init { client_id } => {
                self.client_id.get_or_insert(client_id);
            }
            QueueRecord::LocalShout { seq, text, client_ts } => {
                self.entries.push(LocalEntry { seq, text, client_ts, state: EntryState::Queued })
            }
            QueueRecord::Pushed { seq, id, .. } => self.set_state(seq, EntryState::Pushed { id }),
            QueueRecord::Rejected { seq, code, .. } => self.set_state(seq, EntryState::Rejected { code }),
        }
    }

    fn set_state(&mut self, seq: u64, state: EntryState) {
        if let Ok(i) = self.entries.binary_search_by_key(&seq, |e| e.seq) {
            self.entries[i].state = state;
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq + 1)
    }

    pub fn queued(&self) -> impl Iterator<Item = &LocalEntry> {
        self.entries.iter().filter(|e| e.state == EntryState::Queued)
    }

    pub fn depth(&self) -> usize {
        self.queued().count()
    }

    /// When the latest marker is a start, the time it was issued.
    pub fn active_session(&self) -> Option<Timestamp> {
        self.entries.iter().rev().find_map(|e| match Marker::parse(&e.text) {
            Some(Marker::Start) => Some(Some(e.client_ts)),
            Some(Marker::Stop) => Some(None),
            None => None,
        })?
    }

    pub fn last_activity(&self) -> Option<Timestamp> {
        self.entries.last().map(|e| e.client_ts)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QueueError {
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("queue lock {path}: {source}")]
    Lock {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// An open queue. Holds the lock until dropped.
pub struct ClientQueue {
    journal: Journal,
    view: QueueView,
    client_id: String,
    _lock: File,
}

impl ClientQueue {
    /// Opens the queue in `dir`, waiting for any other holder of the lock.
    /// A client id is generated on first use unless `client_id` is given.
    pub fn open(dir: &Path, client_id: Option<&str>, now: Timestamp) -> Result<ClientQueue, QueueError> {
        let lock_path = dir.join(LOCK_FILE);
        let lock_err = |source| QueueError::Lock { path: lock_path.clone(), source };
        std::fs::create_dir_all(dir).map_err(lock_err)?;
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path).map_err(lock_err)?;
        lock.lock().map_err(lock_err)?;
        let (mut journal, records) =
            Journal::open::<QueueRecord>(&dir.join(QUEUE_FILE), Recovery::DropTornTail, Durability::Sync)?;
        let view = QueueView::fold(records.into_iter().map(|r| r.entry));
        let client_id = match (client_id, &view.client_id) {
            (Some(id), _) => id.to_string(),
            (None, Some(id)) => id.clone(),
            (None, None) => {
                let id = Alphanumeric.sample_string(&mut rand::rng(), 16).to_lowercase();
                journal.append(now, &QueueRecord::Init { client_id: id.clone() })?;
                id
            }
        };
        Ok(ClientQueue { journal, view, client_id, _lock: lock })
    }

    /// Reads the queue without locking; used for status views.
    pub fn snapshot(dir: &Path) -> Result<QueueView, QueueError> {
        let decoded = journal::read_all::<QueueRecord>(&dir.join(QUEUE_FILE))?;
        Ok(QueueView::fold(decoded.records.into_iter().map(|r| r.entry)))
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn view(&self) -> &QueueView {
        &self.view
    }

    fn record(&mut self, now: Timestamp, r: QueueRecord) -> Result<(), QueueError> {
        self.journal.append(now, &r)?;
        self.view.apply(r);
        Ok(())
    }

    /// Persists a new shout and returns its local seq.
    pub fn enqueue(&mut self, text: String, client_ts: Timestamp, now: Timestamp) -> Result<u64, QueueError> {
        let seq = self.view.next_seq();
        self.record(now, QueueRecord::LocalShout { seq, text, client_ts })?;
        Ok(seq)
    }

    pub fn mark_pushed(&mut self, seq: u64, id: u64, server_ts: Timestamp, now: Timestamp) -> Result<(), QueueError> {
        self.record(now, QueueRecord::Pushed { seq, id, server_ts })
    }

    pub fn mark_rejected(&mut self, seq: u64, code: &str, message: &str, now: Timestamp) -> Result<(), QueueError> {
        self.record(now, QueueRecord::Rejected { seq, code: code.to_string(), message: message.to_string() })
    }
}
