//! Server process wiring: opening the data directory, the periodic
//! validator scan, and notification delivery.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::watch;
use tracing::{info, warn};

use crate::notify::{deliver_with_retry, Notification, Notifier, RetryPolicy};
use crate::service::{Service, ServiceConfig};
use crate::store::{Store, StoreError, StoreOptions};
use crate::ts::Clock;
use crate::validation::ScanReport;

pub const JOURNAL_FILE: &str = "journal.jsonl";

pub fn journal_path(data_dir: &Path) -> PathBuf {
    data_dir.join(JOURNAL_FILE)
}

pub fn open_service(
    data_dir: &Path,
    cfg: ServiceConfig,
    opts: StoreOptions,
    clock: Arc<dyn Clock>,
) -> Result<Arc<Service>, StoreError> {
    let store = Store::open(&journal_path(data_dir), opts)?;
    info!(journal = %store.path().display(), seq = store.journal_seq(), "journal opened");
    Ok(Arc::new(Service::new(store, cfg, clock)))
}

/// Sends one notification per new assignment. Failures are logged; the
/// assignment stands and the validator can still find it through the
/// pending list.
pub fn dispatch(notifier: &dyn Notifier, report: &ScanReport, policy: RetryPolicy, sleep: &mut dyn FnMut(Duration)) -> usize {
    let mut delivered = 0;
    for a in &report.assigned {
        let note = match Notification::for_assignment(a) {
            Ok(n) => n,
            Err(e) => {
                warn!(session = %a.session_id, validator = %a.validator, error = %e, "cannot notify validator");
                continue;
            }
        };
        if deliver_with_retry(notifier, &note, policy, sleep).is_ok() {
            delivered += 1;
        }
    }
    delivered
}

/// Scans every `every`, starting one interval after launch, until
/// `shutdown` flips to true.
pub async fn run_scanner(
    svc: Arc<Service>,
    notifier: Arc<dyn Notifier>,
    every: Duration,
    policy: RetryPolicy,
    mut shutdown: watch::Receiver<bool>,
) {
    let mut tick = tokio::time::interval_at(tokio::time::Instant::now() + every, every);
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = tick.tick() => {}
            _ = shutdown.changed() => return,
        }
        let scan_svc = svc.clone();
        let report = tokio::task::spawn_blocking(move || scan_svc.close_and_assign(scan_svc.now(), &mut rand::rng())).await;
        let report = match report {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => {
                warn!(error = %e, "validator scan failed");
                continue;
            }
            Err(e) => {
                warn!(error = %e, "validator scan panicked");
                continue;
            }
        };
        if report.assigned.is_empty() {
            continue;
        }
        info!(assigned = report.assigned.len(), "validators assigned");
        let notifier = notifier.clone();
        tokio::task::spawn_blocking(move || dispatch(notifier.as_ref(), &report, policy, &mut std::thread::sleep));
    }
}
