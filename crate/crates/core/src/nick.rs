//! Developer pseudonyms.

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid nickname {0:?}: expected 2 to 32 characters from [a-z0-9_]")]
pub struct NickError(pub String);

/// A developer pseudonym: 2 to 32 characters of `[a-z0-9_]`.
///
/// Parsing folds ASCII uppercase to lowercase, so `DaneoShiga` and
/// `daneoshiga` name the same developer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NickName(String);

impl NickName {
    pub fn parse(raw: &str) -> Result<Self, NickError> {
        let lower = raw.to_ascii_lowercase();
        let len = lower.len();
        let charset_ok = lower
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if !(2..=32).contains(&len) || !charset_ok {
            return Err(NickError(String::from(raw)));
        }
        Ok(NickName(lower))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NickName {
    type Error = NickError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        NickName::parse(&value)
    }
}

impl From<NickName> for String {
    fn from(n: NickName) -> String {
        n.0
    }
}

impl core::str::FromStr for NickName {
    type Err = NickError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NickName::parse(s)
    }
}

impl fmt::Display for NickName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NickName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_sample_pseudonyms() {
        for n in ["hybrid", "filter0", "v1z", "aut0mata", "o0o0o", "green_kobold"] {
            assert_eq!(NickName::parse(n).unwrap().as_str(), n);
        }
        assert_eq!(NickName::parse("DaneoShiga").unwrap().as_str(), "daneoshiga");
    }

    #[test]
    fn rejects_bad_nicks() {
        for n in ["", "a", "has space", "dash-ed", "ümlaut", &"x".repeat(33)] {
            assert!(NickName::parse(n).is_err(), "{n:?}");
        }
        assert!(NickName::parse(&"x".repeat(32)).is_ok());
    }
}
