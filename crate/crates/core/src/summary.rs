use serde::{Deserialize, Serialize};

use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub shout_count: usize,
    pub duration_secs: i64,
    pub mean_intershout_gap_secs: f64,
    pub has_screencast: bool,
}

pub fn summarize_session(s: &Session) -> SessionSummary {
    let count = s.shout_ids.len();
    let duration = s.duration_secs();
    let mean_gap = if count >= 2 { duration as f64 / (count - 1) as f64 } else { 0.0 };
    SessionSummary {
        shout_count: count,
        duration_secs: duration,
        mean_intershout_gap_secs: mean_gap,
        has_screencast: s.screencast_url.is_some(),
    }
}
