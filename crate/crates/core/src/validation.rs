//! Peer validation state machine and validator selection.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nick::NickName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
}

impl Verdict {
    pub fn parse(raw: &str) -> Option<Verdict> {
        match raw {
            "valid" => Some(Verdict::Valid),
            "invalid" => Some(Verdict::Invalid),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
        }
    }
}

/// `pending -> assigned -> valid | invalid`; nothing else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationState {
    #[default]
    Pending,
    Assigned,
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal validation transition from {from:?}")]
pub struct TransitionError {
    pub from: ValidationState,
}

impl ValidationState {
    pub fn assign(self) -> Result<ValidationState, TransitionError> {
        match self {
            ValidationState::Pending => Ok(ValidationState::Assigned),
            from => Err(TransitionError { from }),
        }
    }

    pub fn decide(self, verdict: Verdict) -> Result<ValidationState, TransitionError> {
        match self {
            ValidationState::Assigned => Ok(match verdict {
                Verdict::Valid => ValidationState::Valid,
                Verdict::Invalid => ValidationState::Invalid,
            }),
            from => Err(TransitionError { from }),
        }
    }

    pub fn is_decided(self) -> bool {
        matches!(self, ValidationState::Valid | ValidationState::Invalid)
    }
}

/// Picks a validator uniformly from `pool`, never the author. `None` when no
/// one else is available.
pub fn choose_validator<'a, R: Rng + ?Sized>(
    author: &NickName,
    pool: &'a [NickName],
    rng: &mut R,
) -> Option<&'a NickName> {
    let eligible: Vec<&NickName> = pool.iter().filter(|n| *n != author).collect();
    if eligible.is_empty() {
        return None;
    }
    Some(eligible[rng.random_range(0..eligible.len())])
}
