//! Grouping one author's shouts into work sessions.
//!
//! A session is a maximal run of shouts (in client time order) where no two
//! consecutive shouts are further apart than the configured session gap.
//! Explicit `session: start` / `session: stop` marker shouts add boundaries:
//! a start marker always opens a new session and a stop marker always closes
//! the current one. Markers never merge what the gap rule splits.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::TimeslotConfig;
use crate::nick::NickName;
use crate::shout::Shout;
use crate::stats::Window;
use crate::time::Timestamp;
use crate::validation::ValidationState;

/// Reserved prefix for marker shouts emitted by the command line client.
pub const MARKER_PREFIX: &str = "session: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Start,
    Stop,
}

impl Marker {
    /// Recognizes normalized marker text. Anything else under the reserved
    /// prefix is an ordinary shout.
    pub fn parse(text: &str) -> Option<Marker> {
        match text.strip_prefix(MARKER_PREFIX)? {
            "start" => Some(Marker::Start),
            "stop" => Some(Marker::Stop),
            _ => None,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Marker::Start => "session: start",
            Marker::Stop => "session: stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("shouts from more than one author: {0} and {1}")]
    MixedAuthors(NickName, NickName),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub author: NickName,
    /// Shout ids in client time order.
    pub shout_ids: Vec<u64>,
    /// Client timestamps, parallel to `shout_ids`.
    pub shout_ts: Vec<Timestamp>,
    pub started_at: Timestamp,
    pub ended_at: Timestamp,
    /// The last shout is a stop marker.
    pub stopped_by_marker: bool,
    pub screencast_url: Option<String>,
    pub validation_state: ValidationState,
}

impl Session {
    pub fn duration_secs(&self) -> i64 {
        self.ended_at - self.started_at
    }

    pub fn len(&self) -> usize {
        self.shout_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shout_ids.is_empty()
    }

    /// Restricts the session to shouts whose client time falls in `window`,
    /// keeping its identity and decorations. `None` when nothing remains.
    ///
    /// A window is an interval and a session is contiguous in client time, so
    /// the clipped run is exactly what grouping the windowed shouts produces.
    pub fn clipped(&self, window: Window) -> Option<Session> {
        let (ids, ts): (Vec<u64>, Vec<Timestamp>) = self
            .shout_ids
            .iter()
            .zip(&self.shout_ts)
            .filter(|(_, t)| window.contains(**t))
            .map(|(id, t)| (*id, *t))
            .unzip();
        let (first, last) = (*ts.first()?, *ts.last()?);
        let whole = ids.len() == self.shout_ids.len();
        Some(Session {
            session_id: self.session_id.clone(),
            author: self.author.clone(),
            shout_ids: ids,
            shout_ts: ts,
            started_at: first,
            ended_at: last,
            stopped_by_marker: whole && self.stopped_by_marker,
            screencast_url: self.screencast_url.clone(),
            validation_state: self.validation_state,
        })
    }
}

/// Stable session identifier derived from the author and the id of the
/// session's first shout.
pub fn session_id(author: &NickName, first_shout_id: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(author.as_str().as_bytes());
    hasher.update([0u8]);
    hasher.update(first_shout_id.to_be_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(24);
    for b in &digest[..12] {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Partitions one author's shouts (any order) into chronological sessions.
pub fn group_sessions(shouts: &[Shout], cfg: &TimeslotConfig) -> Result<Vec<Session>, GroupError> {
    let Some(first) = shouts.first() else {
        return Ok(Vec::new());
    };
    if let Some(other) = shouts.iter().find(|s| s.author != first.author) {
        return Err(GroupError::MixedAuthors(first.author.clone(), other.author.clone()));
    }

    let mut ordered: Vec<&Shout> = shouts.iter().collect();
    ordered.sort_by_key(|s| s.chrono_key());

    let gap = cfg.session_gap_secs();
    let mut sessions = Vec::new();
    let mut run: Vec<&Shout> = Vec::new();
    for shout in ordered {
        if let Some(prev) = run.last() {
            let split = shout.client_ts - prev.client_ts > gap
                || Marker::parse(&shout.text) == Some(Marker::Start)
                || Marker::parse(&prev.text) == Some(Marker::Stop);
            if split {
                sessions.push(build(&run));
                run.clear();
            }
        }
        run.push(shout);
    }
    sessions.push(build(&run));
    Ok(sessions)
}

fn build(run: &[&Shout]) -> Session {
    let first = run[0];
    let last = run[run.len() - 1];
    Session {
        session_id: session_id(&first.author, first.id),
        author: first.author.clone(),
        shout_ids: run.iter().map(|s| s.id).collect(),
        shout_ts: run.iter().map(|s| s.client_ts).collect(),
        started_at: first.client_ts,
        ended_at: last.client_ts,
        stopped_by_marker: Marker::parse(&last.text) == Some(Marker::Stop),
        screencast_url: None,
        validation_state: ValidationState::Pending,
    }
}
