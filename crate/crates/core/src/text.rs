//! Shout text normalization.

use alloc::string::String;

use thiserror::Error;

/// Upper bound on the length of a normalized shout, in Unicode scalar values.
pub const MAX_SHOUT_CHARS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("shout text is empty")]
    EmptyShout,
    #[error("shout text is {chars} characters, limit is {MAX_SHOUT_CHARS}")]
    TooLong { chars: usize },
}

impl TextError {
    /// Stable machine-readable name used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            TextError::EmptyShout => "EmptyShout",
            TextError::TooLong { .. } => "TooLong",
        }
    }
}

/// Trims, collapses whitespace runs to one space and strips control
/// characters. Over-long results are rejected rather than truncated.
pub fn normalize_shout_text(raw: &str) -> Result<String, TextError> {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    let mut chars = 0usize;
    for c in raw.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if c.is_control() {
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
            chars += 1;
        }
        pending_space = false;
        out.push(c);
        chars += 1;
    }
    if out.is_empty() {
        return Err(TextError::EmptyShout);
    }
    if chars > MAX_SHOUT_CHARS {
        return Err(TextError::TooLong { chars });
    }
    Ok(out)
}
