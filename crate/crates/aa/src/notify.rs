//! Delivery of validation requests to the chosen validator.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use lettre::message::Mailbox;
use lettre::{Message, SmtpTransport, Transport as _};
use serde::Serialize;
use thiserror::Error;
use tracing::{info, warn};

use crate::validation::NewAssignment;

#[derive(Debug, Error)]
pub enum DeliveryError {
    #[error("delivery failed: {0}")]
    DeliveryFailed(String),
    #[error("unsupported notify address {0:?}")]
    BadAddress(String),
    #[error("no transport configured for {0}")]
    NoTransport(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotifyAddress {
    Email(String),
    Webhook(String),
}

impl NotifyAddress {
    /// `mailto:` URIs and bare `user@host` are email; `http(s)://` is a webhook.
    pub fn parse(raw: &str) -> Result<Self, DeliveryError> {
        let raw = raw.trim();
        if let Some(addr) = raw.strip_prefix("mailto:") {
            return Ok(NotifyAddress::Email(addr.to_string()));
        }
        if raw.starts_with("http://") || raw.starts_with("https://") {
            return Ok(NotifyAddress::Webhook(raw.to_string()));
        }
        if raw.contains('@') && !raw.contains(char::is_whitespace) {
            return Ok(NotifyAddress::Email(raw.to_string()));
        }
        Err(DeliveryError::BadAddress(raw.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub to: NotifyAddress,
    pub validator: String,
    pub author: String,
    pub session_id: String,
    pub url: String,
}

impl Notification {
    pub fn for_assignment(a: &NewAssignment) -> Result<Self, DeliveryError> {
        Ok(Notification {
            to: NotifyAddress::parse(&a.notify_address)?,
            validator: a.validator.to_string(),
            author: a.author.to_string(),
            session_id: a.session_id.clone(),
            url: a.url.clone(),
        })
    }

    pub fn subject(&self) -> String {
        format!("Validation request: session by {}", self.author)
    }

    pub fn body(&self) -> String {
        format!(
            "Hi {},\n\nYou were picked to validate a work session by {}.\nReview it and mark it valid or invalid here:\n\n{}\n",
            self.validator, self.author, self.url
        )
    }
}

pub trait Notifier: Send + Sync {
    fn deliver(&self, n: &Notification) -> Result<(), DeliveryError>;
}

/// Plain SMTP submission through a relay.
pub struct EmailNotifier {
    transport: SmtpTransport,
    from: Mailbox,
}

impl EmailNotifier {
    pub fn new(relay_host: &str, port: u16, from: &str) -> Result<Self, DeliveryError> {
        let from = from.parse().map_err(|e| DeliveryError::BadAddress(format!("{from}: {e}")))?;
        let transport = SmtpTransport::builder_dangerous(relay_host)
            .port(port)
            .timeout(Some(Duration::from_secs(10)))
            .build();
        Ok(EmailNotifier { transport, from })
    }
}

impl Notifier for EmailNotifier {
    fn deliver(&self, n: &Notification) -> Result<(), DeliveryError> {
        let NotifyAddress::Email(to) = &n.to else {
            return Err(DeliveryError::BadAddress(format!("{:?}", n.to)));
        };
        let to: Mailbox = to.parse().map_err(|e| DeliveryError::BadAddress(format!("{to}: {e}")))?;
        let msg = Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject(n.subject())
            .body(n.body())
            .map_err(|e| DeliveryError::DeliveryFailed(e.to_string()))?;
        self.transport.send(&msg).map(|_| ()).map_err(|e| DeliveryError::DeliveryFailed(e.to_string()))
    }
}

#[derive(Serialize)]
struct WebhookPayload<'a> {
    session_id: &'a str,
    url: &'a str,
}

/// JSON `POST {session_id, url}` to the validator's endpoint.
pub struct WebhookNotifier {
    agent: ureq::Agent,
}

impl Default for WebhookNotifier {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        WebhookNotifier { agent }
    }
}

impl Notifier for WebhookNotifier {
    fn deliver(&self, n: &Notification) -> Result<(), DeliveryError> {
        let NotifyAddress::Webhook(endpoint) = &n.to else {
            return Err(DeliveryError::BadAddress(format!("{:?}", n.to)));
        };
        self.agent
            .post(endpoint)
            .send_json(WebhookPayload { session_id: &n.session_id, url: &n.url })
            .map(|_| ())
            .map_err(|e| DeliveryError::DeliveryFailed(e.to_string()))
    }
}

/// Routes each notification to the transport matching its address.
pub struct RoutingNotifier {
    pub email: Option<Box<dyn Notifier>>,
    pub webhook: Option<Box<dyn Notifier>>,
}

impl Notifier for RoutingNotifier {
    fn deliver(&self, n: &Notification) -> Result<(), DeliveryError> {
        match n.to {
            NotifyAddress::Email(_) => self.email.as_ref().ok_or(DeliveryError::NoTransport("email"))?.deliver(n),
            NotifyAddress::Webhook(_) => self.webhook.as_ref().ok_or(DeliveryError::NoTransport("webhook"))?.deliver(n),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, initial_backoff: Duration::from_secs(1) }
    }
}

/// Tries up to `max_attempts` times, doubling the pause after each failure.
/// Returns the number of attempts used on success.
pub fn deliver_with_retry(
    notifier: &dyn Notifier,
    n: &Notification,
    policy: RetryPolicy,
    sleep: &mut dyn FnMut(Duration),
) -> Result<u32, DeliveryError> {
    let mut backoff = policy.initial_backoff;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match notifier.deliver(n) {
            Ok(()) => {
                info!(session = %n.session_id, validator = %n.validator, attempt, "validation request delivered");
                return Ok(attempt);
            }
            Err(DeliveryError::DeliveryFailed(reason)) if attempt < policy.max_attempts => {
                warn!(session = %n.session_id, attempt, %reason, "delivery failed, retrying");
                sleep(backoff);
                backoff *= 2;
            }
            Err(e) => {
                warn!(session = %n.session_id, attempt, error = %e, "giving up on delivery");
                return Err(e);
            }
        }
    }
}

/// Test double: fails the first `failures` deliveries, then records the rest.
#[derive(Debug, Default)]
pub struct FlakyNotifier {
    failures: AtomicU32,
    pub delivered: std::sync::Mutex<Vec<Notification>>,
}

impl FlakyNotifier {
    pub fn failing(times: u32) -> Self {
        FlakyNotifier { failures: AtomicU32::new(times), delivered: Default::default() }
    }
}

impl Notifier for FlakyNotifier {
    fn deliver(&self, n: &Notification) -> Result<(), DeliveryError> {
        let left = self.failures.load(Ordering::SeqCst);
        if left > 0 {
            self.failures.store(left - 1, Ordering::SeqCst);
            return Err(DeliveryError::DeliveryFailed("transport down".into()));
        }
        self.delivered.lock().expect("poisoned").push(n.clone());
        Ok(())
    }
}
