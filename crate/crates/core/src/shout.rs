use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::nick::NickName;
use crate::time::Timestamp;

/// Which client surface produced a shout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Cli,
    Bot,
    #[default]
    Http,
    Ui,
}

/// Client-chosen deduplication key. A server stores at most one shout per key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdemKey {
    pub client_id: String,
    pub seq: u64,
}

/// One accepted microlog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shout {
    pub id: u64,
    pub author: NickName,
    pub text: String,
    pub client_ts: Timestamp,
    pub server_ts: Timestamp,
    pub origin: Origin,
    pub idem_key: IdemKey,
}

impl Shout {
    /// Ordering key used everywhere shouts are laid out in work time.
    pub fn chrono_key(&self) -> (Timestamp, Timestamp, u64) {
        (self.client_ts, self.server_ts, self.id)
    }
}
