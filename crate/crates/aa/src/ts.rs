//! Wire and journal encoding of timestamps, plus the clock abstraction.
//!
//! Timestamps travel as ISO-8601 UTC with seconds precision, e.g.
//! `2013-05-28T12:06:00Z`. Parsing accepts any RFC 3339 offset and plain
//! `YYYY-MM-DD` dates (midnight UTC); sub-second parts are dropped.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use aa_core::Timestamp;
use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Deserializer, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
#[error("invalid timestamp {0:?}, expected ISO-8601 like 2013-05-28T12:06:00Z")]
pub struct TimestampError(pub String);

pub fn parse(raw: &str) -> Result<Timestamp, TimestampError> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(Timestamp::from_unix(dt.timestamp()));
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        let dt = d.and_hms_opt(0, 0, 0).expect("midnight exists");
        return Ok(Timestamp::from_unix(dt.and_utc().timestamp()));
    }
    Err(TimestampError(raw.to_string()))
}

pub fn format(t: Timestamp) -> String {
    t.to_string()
}

/// Short day-first display, `DD/MM/YYYY HH:MM` in UTC.
pub fn display_short(t: Timestamp) -> String {
    match DateTime::from_timestamp(t.unix(), 0) {
        Some(dt) => dt.format("%d/%m/%Y %H:%M").to_string(),
        None => t.to_string(),
    }
}

pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(t)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
    let raw = String::deserialize(d)?;
    parse(&raw).map_err(serde::de::Error::custom)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.collect_str(t),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
        match Option::<String>::deserialize(d)? {
            Some(raw) => parse(&raw).map(Some).map_err(serde::de::Error::custom),
            None => Ok(None),
        }
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_unix(chrono::Utc::now().timestamp())
    }
}

/// A clock that only moves when told to. Clones share the same time.
#[derive(Debug, Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(Arc::new(AtomicI64::new(start.unix())))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t.unix(), Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_unix(self.0.load(Ordering::SeqCst))
    }
}
