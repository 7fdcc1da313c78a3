//! Timeslot reminders.

use crate::config::TimeslotConfig;
use crate::time::Timestamp;

/// The next reminder after `now` on the timeslot grid anchored at
/// `last_activity`.
///
/// If one timeslot after the last activity is still ahead, that is the
/// answer. After a long pause the grid is skipped forward to the first
/// boundary strictly after `now`, so a returning developer gets one reminder
/// rather than a backlog of them.
pub fn next_alert(last_activity: Timestamp, cfg: &TimeslotConfig, now: Timestamp) -> Timestamp {
    let slot = cfg.timeslot_secs();
    let elapsed = (now - last_activity).max(0);
    let k = elapsed / slot + 1;
    last_activity + k * slot
}

/// Alert state for one running session, driven by an external clock.
///
/// A scheduled reminder is not moved by activity; once it fires the next
/// one is computed from the latest activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlertSchedule {
    cfg: TimeslotConfig,
    last_activity: Timestamp,
    due: Timestamp,
}

impl AlertSchedule {
    pub fn start(cfg: TimeslotConfig, at: Timestamp) -> Self {
        AlertSchedule { cfg, last_activity: at, due: next_alert(at, &cfg, at) }
    }

    pub fn due(&self) -> Timestamp {
        self.due
    }

    pub fn last_activity(&self) -> Timestamp {
        self.last_activity
    }

    pub fn record_activity(&mut self, at: Timestamp) {
        if at > self.last_activity {
            self.last_activity = at;
        }
    }

    /// Returns the boundary that fired, if `now` has reached the due time.
    pub fn poll(&mut self, now: Timestamp) -> Option<Timestamp> {
        if now < self.due {
            return None;
        }
        let fired = self.due;
        self.due = next_alert(self.last_activity, &self.cfg, now);
        Some(fired)
    }
}
