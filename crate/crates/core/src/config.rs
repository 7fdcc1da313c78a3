use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("timeslot must be between 1 and 120 minutes, got {0}")]
    TimeslotOutOfRange(u32),
    #[error("session gap ({gap} min) must exceed the timeslot ({timeslot} min)")]
    GapNotAboveTimeslot { gap: u32, timeslot: u32 },
}

/// Micrologging cadence and the inactivity threshold that separates sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeslotConfig {
    timeslot_min: u32,
    session_gap_min: u32,
}

impl TimeslotConfig {
    pub const DEFAULT_TIMESLOT_MIN: u32 = 15;
    pub const DEFAULT_SESSION_GAP_MIN: u32 = 60;
    /// The recommended timeslot band, in minutes.
    pub const PROPOSED_BAND: (u32, u32) = (5, 15);

    pub fn new(timeslot_min: u32, session_gap_min: u32) -> Result<Self, ConfigError> {
        if !(1..=120).contains(&timeslot_min) {
            return Err(ConfigError::TimeslotOutOfRange(timeslot_min));
        }
        if session_gap_min <= timeslot_min {
            return Err(ConfigError::GapNotAboveTimeslot {
                gap: session_gap_min,
                timeslot: timeslot_min,
            });
        }
        Ok(TimeslotConfig { timeslot_min, session_gap_min })
    }

    pub fn timeslot_min(&self) -> u32 {
        self.timeslot_min
    }

    pub fn session_gap_min(&self) -> u32 {
        self.session_gap_min
    }

    pub fn timeslot_secs(&self) -> i64 {
        i64::from(self.timeslot_min) * 60
    }

    pub fn session_gap_secs(&self) -> i64 {
        i64::from(self.session_gap_min) * 60
    }

    /// True when the timeslot lies outside the recommended 5 to 15 minute band.
    /// Such values are legal, just unusual.
    pub fn outside_proposed_band(&self) -> bool {
        let (lo, hi) = Self::PROPOSED_BAND;
        !(lo..=hi).contains(&self.timeslot_min)
    }
}

impl Default for TimeslotConfig {
    fn default() -> Self {
        TimeslotConfig {
            timeslot_min: Self::DEFAULT_TIMESLOT_MIN,
            session_gap_min: Self::DEFAULT_SESSION_GAP_MIN,
        }
    }
}
