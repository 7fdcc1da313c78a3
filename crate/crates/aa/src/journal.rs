//! Append-only line journal shared by the server store and the client queue.
//!
//! Each record is one UTF-8 JSON object terminated by `\n`:
//!
//! ```text
//! {"v":1,"seq":7,"written_at":"2013-05-27T02:48:00Z","kind":"shout","payload":{...}}
//! ```
//!
//! `v` is the schema version, `seq` strictly increases (gaps allowed), and
//! `kind`/`payload` are supplied by the entry type. A final line without its
//! terminator is a torn write.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use aa_core::Timestamp;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<E> {
    pub v: u32,
    pub seq: u64,
    #[serde(with = "crate::ts")]
    pub written_at: Timestamp,
    #[serde(flatten)]
    pub entry: E,
}

#[derive(Debug, Error)]
pub enum JournalError {
    /// The journal cannot be read past the record after `last_complete_seq`.
    #[error("corrupt journal {path}: {reason} (last complete seq {last_complete_seq})")]
    CorruptJournal { path: PathBuf, last_complete_seq: u64, reason: String },
    #[error("journal storage failure on {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("journal {path} is in use by another process")]
    Locked { path: PathBuf },
    #[error("encoding journal record: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fdatasync` after every record.
    #[default]
    Sync,
    /// Leave flushing to the OS. Survives process crashes, not power loss.
    OsBuffered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recovery {
    /// A torn final record is an error.
    #[default]
    Strict,
    /// A torn final record is dropped and the file truncated to the last
    /// complete record.
    DropTornTail,
}

/// Result of decoding a journal image.
#[derive(Debug)]
pub struct Decoded<E> {
    pub records: Vec<Envelope<E>>,
    /// Byte length of the complete records.
    pub complete_len: u64,
    pub torn_tail: bool,
}

/// Decodes complete records. Mid-file damage is always an error; a torn
/// final line is reported, not raised.
pub fn decode<E: DeserializeOwned>(path: &Path, data: &[u8]) -> Result<Decoded<E>, JournalError> {
    let mut records: Vec<Envelope<E>> = Vec::new();
    let mut offset = 0usize;
    let mut last_seq = 0u64;
    while offset < data.len() {
        let Some(nl) = data[offset..].iter().position(|b| *b == b'\n') else {
            return Ok(Decoded { records, complete_len: offset as u64, torn_tail: true });
        };
        let line = &data[offset..offset + nl];
        let corrupt = |reason: String| JournalError::CorruptJournal {
            path: path.to_path_buf(),
            last_complete_seq: last_seq,
            reason,
        };
        let rec: Envelope<E> = serde_json::from_slice(line).map_err(|e| corrupt(format!("bad record at byte {offset}: {e}")))?;
        if rec.v != SCHEMA_VERSION {
            return Err(corrupt(format!("unsupported schema version {}", rec.v)));
        }
        if rec.seq <= last_seq {
            return Err(corrupt(format!("seq {} does not increase", rec.seq)));
        }
        last_seq = rec.seq;
        records.push(rec);
        offset += nl + 1;
    }
    Ok(Decoded { records, complete_len: offset as u64, torn_tail: false })
}

/// Single-writer handle on a journal file.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    len: u64,
    last_seq: u64,
    durability: Durability,
}

impl Journal {
    /// Opens (creating if needed) and returns every complete record.
    pub fn open<E: DeserializeOwned>(
        path: &Path,
        recovery: Recovery,
        durability: Durability,
    ) -> Result<(Journal, Vec<Envelope<E>>), JournalError> {
        let storage = |source| JournalError::Storage { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(storage)?;
            }
        }
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(storage)?;
        match file.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(JournalError::Locked { path: path.to_path_buf() }),
            Err(std::fs::TryLockError::Error(e)) => return Err(storage(e)),
        }
        let mut data = Vec::new();
        file.read_to_end(&mut data).map_err(storage)?;
        let decoded = decode::<E>(path, &data)?;
        let last_seq = decoded.records.last().map_or(0, |r| r.seq);
        if decoded.torn_tail {
            match recovery {
                Recovery::Strict => {
                    return Err(JournalError::CorruptJournal {
                        path: path.to_path_buf(),
                        last_complete_seq: last_seq,
                        reason: "torn final record".to_string(),
                    })
                }
                Recovery::DropTornTail => {
                    warn!(
                        path = %path.display(),
                        dropped_bytes = data.len() as u64 - decoded.complete_len,
                        last_complete_seq = last_seq,
                        "dropping torn final journal record"
                    );
                    file.set_len(decoded.complete_len).map_err(storage)?;
                    file.sync_all().map_err(storage)?;
                }
            }
        }
        file.seek(SeekFrom::Start(decoded.complete_len)).map_err(storage)?;
        let journal = Journal { path: path.to_path_buf(), file, len: decoded.complete_len, last_seq, durability };
        Ok((journal, decoded.records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Writes one record with the next seq and returns it. On failure the
    /// file is cut back so no partial record remains.
    pub fn append<E: Serialize>(&mut self, written_at: Timestamp, entry: &E) -> Result<u64, JournalError> {
        let seq = self.last_seq + 1;
        let env = Envelope { v: SCHEMA_VERSION, seq, written_at, entry };
        let mut line = serde_json::to_vec(&env)?;
        line.push(b'\n');
        if let Err(source) = self.write_line(&line) {
            let _ = self.file.set_len(self.len);
            let _ = self.file.seek(SeekFrom::Start(self.len));
            return Err(JournalError::Storage { path: self.path.clone(), source });
        }
        self.len += line.len() as u64;
        self.last_seq = seq;
        Ok(seq)
    }

    fn write_line(&mut self, line: &[u8]) -> std::io::Result<()> {
        self.file.write_all(line)?;
        if self.durability == Durability::Sync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

/// Reads every complete record without taking the writer role.
pub fn read_all<E: DeserializeOwned>(path: &Path) -> Result<Decoded<E>, JournalError> {
    let data = match std::fs::read(path) {
        Ok(d) => d,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(source) => return Err(JournalError::Storage { path: path.to_path_buf(), source }),
    };
    decode(path, &data)
}
