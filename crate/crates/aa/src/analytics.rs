//! Developer and team statistics over the stored corpus.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use aa_core::{compliance_days, ComplianceDay, DeveloperStats, NickName, TeamAggregate, Window};
use serde::{Deserialize, Serialize};

use crate::service::{parse_window, ApiError, Service, WindowParams};
use crate::store::{SessionIndex, State};

/// Longest window the team report expands into per-day rows.
pub const MAX_REPORT_DAYS: i64 = 366;
pub const DEFAULT_REPORT_DAYS: i64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub nick: NickName,
    pub stats: DeveloperStats,
    pub compliance: Vec<ComplianceDay>,
    pub single_session_compliant_days: u64,
    pub cumulative_compliant_days: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamReport {
    pub window: Window,
    pub compliance_secs: i64,
    pub members: Vec<MemberReport>,
    pub aggregate: TeamAggregate,
}

impl Service {
    pub fn compute_stats(&self, nick: &str, window: Window) -> Result<DeveloperStats, ApiError> {
        let nick = NickName::parse(nick).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let store = self.read();
        let state = store.state();
        if !known(state).contains(&nick) {
            return Err(ApiError::NotFound(format!("unknown developer {nick}")));
        }
        let sessions = self.sessions_index().for_author(state, &nick);
        Ok(DeveloperStats::compute(&sessions, window))
    }

    pub fn developer_stats(&self, nick: &str, params: &WindowParams) -> Result<DeveloperStats, ApiError> {
        let window = parse_window(params, self.default_report_window())?;
        self.compute_stats(nick, window)
    }

    pub fn team_report(&self, window: Window) -> Result<TeamReport, ApiError> {
        let store = self.read();
        team_report(store.state(), self.sessions_index(), window, self.config().compliance_secs)
    }

    pub fn team_report_for(&self, params: &WindowParams) -> Result<TeamReport, ApiError> {
        self.team_report(parse_window(params, self.default_report_window())?)
    }

    /// The last seven whole UTC days up to and including today.
    pub fn default_report_window(&self) -> Window {
        let to = self.now().start_of_day().plus_secs(aa_core::time::SECS_PER_DAY);
        Window { from: to.plus_secs(-DEFAULT_REPORT_DAYS * aa_core::time::SECS_PER_DAY), to }
    }
}

/// Per-developer stats, both compliance readings, and team totals.
pub fn team_report(state: &State, sessions: &SessionIndex, window: Window, required_secs: i64) -> Result<TeamReport, ApiError> {
    if window.to - window.from > MAX_REPORT_DAYS * aa_core::time::SECS_PER_DAY {
        return Err(ApiError::BadRequest(format!("report window is limited to {MAX_REPORT_DAYS} days")));
    }
    let members: Vec<MemberReport> = known(state)
        .into_iter()
        .map(|nick| {
            let own = sessions.for_author(state, &nick);
            let compliance = compliance_days(&own, window, required_secs);
            MemberReport {
                stats: DeveloperStats::compute(&own, window),
                single_session_compliant_days: compliance.iter().filter(|d| d.single_session_compliant).count() as u64,
                cumulative_compliant_days: compliance.iter().filter(|d| d.cumulative_compliant).count() as u64,
                compliance,
                nick,
            }
        })
        .collect();
    let aggregate = TeamAggregate::from_members(members.iter().map(|m| &m.stats));
    Ok(TeamReport { window, compliance_secs: required_secs, members, aggregate })
}

/// Registered developers plus anyone who has shouted.
fn known(state: &State) -> BTreeSet<NickName> {
    state.developers().map(|d| d.nick.clone()).chain(state.authors().cloned()).collect()
}

pub fn render_table(report: &TeamReport) -> String {
    let mut out = String::new();
    let hours = report.compliance_secs as f64 / 3600.0;
    let _ = writeln!(out, "window {} .. {}", report.window.from, report.window.to);
    let days = report.window.days().count();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>7} {:>9} {:>10} {:>5} {:>9} {:>9} {:>7} {:>7}",
        "developer", "sessions", "shouts", "total_h", "mean_min", "days", "single", "cumul", "valid", "invalid"
    );
    for m in &report.members {
        let s = &m.stats;
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>7} {:>9.2} {:>10.1} {:>5} {:>9} {:>9} {:>7} {:>7}",
            m.nick.as_str(),
            s.sessions_count,
            s.shouts_count,
            s.total_session_seconds as f64 / 3600.0,
            s.mean_session_duration_s / 60.0,
            s.days_with_sessions,
            format!("{}/{days}", m.single_session_compliant_days),
            format!("{}/{days}", m.cumulative_compliant_days),
            s.validation.valid,
            s.validation.invalid,
        );
    }
    let a = &report.aggregate;
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>7} {:>9.2} {:>10.1}",
        "team",
        a.sessions_count,
        a.shouts_count,
        a.total_session_seconds as f64 / 3600.0,
        a.mean_session_duration_s / 60.0
    );
    let _ = writeln!(out, "single: days with one session >= {hours:.1}h; cumul: days with >= {hours:.1}h in total");
    out
}
