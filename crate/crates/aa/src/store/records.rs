//! Journal payloads for the server store.

use aa_core::{NickName, Origin, Timestamp, Verdict};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Entry {
    Shout(ShoutRecord),
    DeveloperUpsert(DeveloperRecord),
    ScreencastAttach(ScreencastRecord),
    ValidationAssign(AssignRecord),
    ValidationVerdict(VerdictRecord),
}

impl Entry {
    pub fn kind(&self) -> &'static str {
        match self {
            Entry::Shout(_) => "shout",
            Entry::DeveloperUpsert(_) => "developer_upsert",
            Entry::ScreencastAttach(_) => "screencast_attach",
            Entry::ValidationAssign(_) => "validation_assign",
            Entry::ValidationVerdict(_) => "validation_verdict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShoutRecord {
    pub id: u64,
    pub author: NickName,
    pub text: String,
    #[serde(with = "crate::ts")]
    pub client_ts: Timestamp,
    #[serde(with = "crate::ts")]
    pub server_ts: Timestamp,
    pub origin: Origin,
    pub client_id: String,
    pub client_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AliasRecord {
    pub network: String,
    pub alias: String,
    pub relay_token_sha256: String,
}

/// Full replacement of a developer's profile and credentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperRecord {
    pub nick: NickName,
    pub token_sha256: String,
    #[serde(default)]
    pub aliases: Vec<AliasRecord>,
    pub notify_address: String,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreencastRecord {
    pub session_id: String,
    pub author: NickName,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignRecord {
    pub session_id: String,
    pub author: NickName,
    pub validator: NickName,
    pub token_sha256: String,
    #[serde(with = "crate::ts")]
    pub assigned_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub token_sha256: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(with = "crate::ts")]
    pub decided_at: Timestamp,
}
