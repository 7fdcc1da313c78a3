//! Per-developer statistics over grouped sessions.
//!
//! Everything here is computed from session groupings alone, so recomputing
//! from the same journal gives identical numbers.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Session;
use crate::time::{Timestamp, SECS_PER_DAY};
use crate::validation::ValidationState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("window start {from} is after its end {to}")]
pub struct WindowError {
    pub from: Timestamp,
    pub to: Timestamp,
}

/// Half-open interval `[from, to)` of client time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub from: Timestamp,
    pub to: Timestamp,
}

impl Window {
    pub fn new(from: Timestamp, to: Timestamp) -> Result<Self, WindowError> {
        if from > to {
            return Err(WindowError { from, to });
        }
        Ok(Window { from, to })
    }

    pub const ALL: Window = Window { from: Timestamp::from_unix(i64::MIN / 2), to: Timestamp::from_unix(i64::MAX / 2) };

    pub fn contains(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }

    /// Start-of-day instants of every UTC day the window touches.
    pub fn days(&self) -> impl Iterator<Item = Timestamp> {
        let (first, last) = if self.from < self.to {
            (self.from.day_index(), (self.to + -1).day_index())
        } else {
            (1, 0)
        };
        (first..=last).map(|d| Timestamp::from_unix(d * SECS_PER_DAY))
    }
}

/// Counts of intra-session gaps between consecutive shouts.
///
/// Buckets are `[0,5)`, `[5,10)`, `[10,15)`, `[15,30)`, `[30,60]` minutes and
/// an overflow bucket for gaps above an hour, which only occur when the
/// session gap is configured above 60 minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GapHistogram {
    #[serde(rename = "0-5m")]
    pub under_5m: u64,
    #[serde(rename = "5-10m")]
    pub from_5m: u64,
    #[serde(rename = "10-15m")]
    pub from_10m: u64,
    #[serde(rename = "15-30m")]
    pub from_15m: u64,
    #[serde(rename = "30-60m")]
    pub from_30m: u64,
    #[serde(rename = "60m+")]
    pub over_60m: u64,
}

impl GapHistogram {
    pub fn record(&mut self, gap_secs: i64) {
        let bucket = match gap_secs {
            g if g < 300 => &mut self.under_5m,
            g if g < 600 => &mut self.from_5m,
            g if g < 900 => &mut self.from_10m,
            g if g < 1800 => &mut self.from_15m,
            g if g <= 3600 => &mut self.from_30m,
            _ => &mut self.over_60m,
        };
        *bucket += 1;
    }

    pub fn total(&self) -> u64 {
        self.under_5m + self.from_5m + self.from_10m + self.from_15m + self.from_30m + self.over_60m
    }
}

/// `valid + invalid + pending` always equals the session count; `pending`
/// includes sessions that have a validator but no verdict yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationCounts {
    pub validated: u64,
    pub valid: u64,
    pub invalid: u64,
    pub pending: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperStats {
    pub window: Window,
    pub sessions_count: u64,
    pub total_session_seconds: i64,
    pub shouts_count: u64,
    pub mean_session_duration_s: f64,
    pub mean_shouts_per_session: f64,
    pub intershout_gap_histogram: GapHistogram,
    pub days_with_sessions: u64,
    pub validation: ValidationCounts,
}

impl DeveloperStats {
    /// Stats over `sessions` (one author's full groupings) clipped to `window`.
    pub fn compute(sessions: &[Session], window: Window) -> DeveloperStats {
        let clipped: Vec<Session> = sessions.iter().filter_map(|s| s.clipped(window)).collect();
        let mut stats = DeveloperStats {
            window,
            sessions_count: clipped.len() as u64,
            total_session_seconds: 0,
            shouts_count: 0,
            mean_session_duration_s: 0.0,
            mean_shouts_per_session: 0.0,
            intershout_gap_histogram: GapHistogram::default(),
            days_with_sessions: 0,
            validation: ValidationCounts::default(),
        };
        let mut days = BTreeSet::new();
        for s in &clipped {
            stats.total_session_seconds += s.duration_secs();
            stats.shouts_count += s.len() as u64;
            for pair in s.shout_ts.windows(2) {
                stats.intershout_gap_histogram.record(pair[1] - pair[0]);
            }
            days.extend(s.shout_ts.iter().map(|t| t.day_index()));
            match s.validation_state {
                ValidationState::Valid => stats.validation.valid += 1,
                ValidationState::Invalid => stats.validation.invalid += 1,
                ValidationState::Pending | ValidationState::Assigned => stats.validation.pending += 1,
            }
        }
        stats.validation.validated = stats.validation.valid + stats.validation.invalid;
        stats.days_with_sessions = days.len() as u64;
        if stats.sessions_count > 0 {
            let n = stats.sessions_count as f64;
            stats.mean_session_duration_s = stats.total_session_seconds as f64 / n;
            stats.mean_shouts_per_session = stats.shouts_count as f64 / n;
        }
        stats
    }
}

/// One developer-day judged against the daily session requirement, under
/// both readings of it: a single long session, or enough time in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceDay {
    pub day: Timestamp,
    pub sessions: u64,
    pub longest_session_s: i64,
    pub total_session_s: i64,
    pub single_session_compliant: bool,
    pub cumulative_compliant: bool,
}

/// Evaluates every UTC day in `window`. Sessions count toward the day they
/// start on.
pub fn compliance_days(sessions: &[Session], window: Window, required_secs: i64) -> Vec<ComplianceDay> {
    let clipped: Vec<Session> = sessions.iter().filter_map(|s| s.clipped(window)).collect();
    window
        .days()
        .map(|day| {
            let on_day = clipped.iter().filter(|s| s.started_at.start_of_day() == day);
            let mut out = ComplianceDay {
                day,
                sessions: 0,
                longest_session_s: 0,
                total_session_s: 0,
                single_session_compliant: false,
                cumulative_compliant: false,
            };
            for s in on_day {
                out.sessions += 1;
                out.longest_session_s = out.longest_session_s.max(s.duration_secs());
                out.total_session_s += s.duration_secs();
            }
            out.single_session_compliant = out.sessions > 0 && out.longest_session_s >= required_secs;
            out.cumulative_compliant = out.sessions > 0 && out.total_session_s >= required_secs;
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TeamAggregate {
    pub developers: u64,
    pub sessions_count: u64,
    pub shouts_count: u64,
    pub total_session_seconds: i64,
    pub mean_session_duration_s: f64,
    pub validation: ValidationCounts,
}

impl TeamAggregate {
    pub fn from_members<'a>(members: impl IntoIterator<Item = &'a DeveloperStats>) -> TeamAggregate {
        let mut agg = TeamAggregate::default();
        for m in members {
            agg.developers += 1;
            agg.sessions_count += m.sessions_count;
            agg.shouts_count += m.shouts_count;
            agg.total_session_seconds += m.total_session_seconds;
            agg.validation.validated += m.validation.validated;
            agg.validation.valid += m.validation.valid;
            agg.validation.invalid += m.validation.invalid;
            agg.validation.pending += m.validation.pending;
        }
        if agg.sessions_count > 0 {
            agg.mean_session_duration_s = agg.total_session_seconds as f64 / agg.sessions_count as f64;
        }
        agg
    }
}
