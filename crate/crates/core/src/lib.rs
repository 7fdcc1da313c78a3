//! Domain model and pure algorithms for algorithmic autoregulation.
//!
//! Developers emit short timestamped micrologs ("shouts") while they work.
//! This crate holds everything that does not touch IO: text normalization,
//! grouping shouts into sessions, timeslot alert scheduling, session
//! summaries, validator selection and per-developer statistics.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod alert;
pub mod config;
pub mod nick;
pub mod session;
pub mod shout;
pub mod stats;
pub mod summary;
pub mod text;
pub mod time;
pub mod validation;

pub use alert::{next_alert, AlertSchedule};
pub use config::{ConfigError, TimeslotConfig};
pub use nick::{NickError, NickName};
pub use session::{group_sessions, session_id, GroupError, Marker, Session};
pub use shout::{IdemKey, Origin, Shout};
pub use stats::{compliance_days, ComplianceDay, DeveloperStats, GapHistogram, TeamAggregate, ValidationCounts, Window, WindowError};
pub use summary::{summarize_session, SessionSummary};
pub use text::{normalize_shout_text, TextError, MAX_SHOUT_CHARS};
pub use time::{ParseTimestampError, Timestamp};
pub use validation::{choose_validator, ValidationState, Verdict};
