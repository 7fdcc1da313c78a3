//! Algorithmic autoregulation service: the journal-backed shout store, the
//! HTTP API, peer validation, analytics, the `aa` command line client and
//! the IRC relay bot.
//!
//! Pure domain logic lives in [`aa_core`]; this crate adds IO.

pub mod admin;
pub mod analytics;
pub mod api;
pub mod bot;
pub mod client;
pub mod fixture;
pub mod journal;
pub mod notify;
pub mod secret;
pub mod server;
pub mod service;
pub mod store;
pub mod ts;
pub mod validation;
