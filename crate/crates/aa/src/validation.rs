//! Peer validation: closing sessions, assigning a random teammate, and
//! recording their verdict.

use aa_core::{choose_validator, NickName, Timestamp, Verdict};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::service::{ApiError, Service, SessionDetail, SessionView};
use crate::store::{Assignment, AssignRecord, Entry, StoreError, VerdictRecord};

pub const MAX_COMMENT_CHARS: usize = 2000;

/// A freshly created assignment. `token` is only known here; the journal
/// keeps its digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewAssignment {
    pub session_id: String,
    pub author: NickName,
    pub validator: NickName,
    pub token: String,
    pub url: String,
    pub notify_address: String,
    pub assigned_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub assigned: Vec<NewAssignment>,
    /// Closed sessions left pending because nobody but the author is active.
    pub no_eligible_validator: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VerdictRequest {
    pub verdict: String,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentView {
    pub session_id: String,
    pub author: NickName,
    pub validator: NickName,
    pub assigned_at: Timestamp,
    pub verdict: Option<Verdict>,
    pub comment: Option<String>,
    pub decided_at: Option<Timestamp>,
}

impl From<&Assignment> for AssignmentView {
    fn from(a: &Assignment) -> Self {
        AssignmentView {
            session_id: a.session_id.clone(),
            author: a.author.clone(),
            validator: a.validator.clone(),
            assigned_at: a.assigned_at,
            verdict: a.verdict,
            comment: a.comment.clone(),
            decided_at: a.decided_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewView {
    #[serde(flatten)]
    pub assignment: AssignmentView,
    pub session: Option<SessionDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingEntry {
    #[serde(flatten)]
    pub assignment: AssignmentView,
    pub session: Option<SessionView>,
}

impl Service {
    /// Assigns a validator to every closed, still pending session.
    ///
    /// A session is closed once its last shout is older than the session
    /// gap, or immediately when it ends with a stop marker. The scan holds
    /// the write lock, so repeated or overlapping scans assign each session
    /// at most once.
    pub fn close_and_assign<R: Rng + ?Sized>(&self, now: Timestamp, rng: &mut R) -> Result<ScanReport, ApiError> {
        let gap = self.config().timeslot.session_gap_secs();
        let mut store = self.write();
        let pool = store.state().active_developers();
        let authors: Vec<NickName> = store.state().authors().cloned().collect();
        let mut report = ScanReport::default();
        for author in authors {
            for session in self.sessions_index().for_author(store.state(), &author) {
                let closed = session.stopped_by_marker || now - session.ended_at > gap;
                if !closed || store.state().assignment_for_session(&session.session_id).is_some() {
                    continue;
                }
                let Some(validator) = choose_validator(&author, &pool, rng).cloned() else {
                    warn!(session = %session.session_id, %author, "no eligible validator; session stays pending");
                    report.no_eligible_validator.push(session.session_id.clone());
                    continue;
                };
                let token = crate::secret::new_token();
                let record = AssignRecord {
                    session_id: session.session_id.clone(),
                    author: author.clone(),
                    validator: validator.clone(),
                    token_sha256: crate::secret::digest(&token),
                    assigned_at: now,
                };
                match store.append(now, Entry::ValidationAssign(record)) {
                    Ok(_) => {}
                    Err(StoreError::AlreadyAssigned { .. }) => continue,
                    Err(e) => return Err(e.into()),
                }
                let notify_address = store
                    .state()
                    .developer(&validator)
                    .map(|d| d.notify_address.clone())
                    .unwrap_or_default();
                report.assigned.push(NewAssignment {
                    url: validation_url(&self.config().base_url, &token),
                    session_id: session.session_id,
                    author: author.clone(),
                    validator,
                    token,
                    notify_address,
                    assigned_at: now,
                });
            }
        }
        Ok(report)
    }

    pub fn token_known(&self, token: &str) -> bool {
        self.read().state().assignment(token).is_some()
    }

    pub fn review(&self, token: &str) -> Result<ReviewView, ApiError> {
        let store = self.read();
        let a = store.state().assignment(token).ok_or_else(|| ApiError::NotFound("unknown validation token".into()))?;
        Ok(ReviewView { assignment: a.into(), session: self.session_detail_in(store.state(), &a.session_id) })
    }

    pub fn record_verdict(&self, token: &str, req: VerdictRequest) -> Result<AssignmentView, ApiError> {
        let now = self.now();
        let mut store = self.write();
        if store.state().assignment(token).is_none() {
            return Err(ApiError::NotFound("unknown validation token".into()));
        }
        let verdict = Verdict::parse(&req.verdict)
            .ok_or_else(|| ApiError::unprocessable("InvalidVerdict", "verdict must be \"valid\" or \"invalid\""))?;
        let comment = req.comment.map(|c| c.trim().to_string()).filter(|c| !c.is_empty());
        if comment.as_ref().is_some_and(|c| c.chars().count() > MAX_COMMENT_CHARS) {
            return Err(ApiError::unprocessable("CommentTooLong", format!("comment exceeds {MAX_COMMENT_CHARS} characters")));
        }
        store.append(
            now,
            Entry::ValidationVerdict(VerdictRecord { token_sha256: crate::secret::digest(token), verdict, comment, decided_at: now }),
        )?;
        Ok(store.state().assignment(token).expect("just decided").into())
    }

    pub fn pending_validations(&self, auth_token: &str) -> Result<Vec<PendingEntry>, ApiError> {
        let store = self.read();
        let state = store.state();
        let cred = self.authenticate_token(state, auth_token)?;
        let me = cred.nick();
        Ok(state
            .assignments()
            .filter(|a| &a.validator == me && a.verdict.is_none())
            .map(|a| PendingEntry {
                assignment: a.into(),
                session: self.sessions_index().find(state, &a.session_id).as_ref().map(SessionView::from),
            })
            .collect())
    }
}

pub fn validation_url(base: &str, token: &str) -> String {
    format!("{}/validate/{token}", base.trim_end_matches('/'))
}
