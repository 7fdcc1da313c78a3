use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use aa::admin;
use aa::analytics::{render_table, team_report};
use aa::fixture::{sample_feed_chronological, SAMPLE_TEAM};
use aa::journal::{Durability, JournalError, Recovery};
use aa::notify::{EmailNotifier, RetryPolicy, RoutingNotifier, WebhookNotifier};
use aa::server::{journal_path, open_service, run_scanner};
use aa::service::ServiceConfig;
use aa::store::{NewShout, SessionIndex, Store, StoreError, StoreOptions};
use aa::ts::{Clock, SystemClock};
use aa_core::{IdemKey, NickName, Origin, TimeslotConfig, Window};
use clap::{Args, Parser, Subcommand};
use tokio::sync::watch;
use tracing::info;

#[derive(Parser)]
#[command(name = "aa-server", version, about = "Shout feed, session and validation server")]
struct Cli {
    /// Directory holding the journal.
    #[arg(long, env = "AA_DATA_DIR", default_value = "aa-data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Manage developers and their tokens.
    #[command(subcommand)]
    Dev(DevCommand),
    /// Print per-developer statistics and compliance as a table.
    Report(ReportArgs),
    /// Enroll the sample team and load the sample feed.
    Seed,
}

#[derive(Args)]
struct Grouping {
    /// Minutes of silence that close a session.
    #[arg(long, default_value_t = 60)]
    session_gap: u32,
    /// Alert timeslot in minutes.
    #[arg(long, default_value_t = 15)]
    timeslot: u32,
}

impl Grouping {
    fn config(&self) -> Result<TimeslotConfig, String> {
        TimeslotConfig::new(self.timeslot, self.session_gap).map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[command(flatten)]
    grouping: Grouping,
    /// Accepted shouts per developer per minute; 0 disables the limit.
    #[arg(long, default_value_t = 60)]
    rate_limit: u32,
    /// Public URL used in validation links.
    #[arg(long, env = "AA_BASE_URL")]
    base_url: Option<String>,
    /// Seconds between validator assignment scans.
    #[arg(long, default_value_t = 60)]
    scan_interval: u64,
    /// Hours a developer-day needs for the compliance flags.
    #[arg(long, default_value_t = 2.0)]
    compliance_hours: f64,
    /// Drop a torn final journal record instead of refusing to start.
    #[arg(long)]
    recover: bool,
    /// Skip fsync after each record.
    #[arg(long)]
    no_fsync: bool,
    /// Static dashboard files to serve under /.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// SMTP relay for email notifications, as host or host:port.
    #[arg(long, env = "AA_SMTP_RELAY")]
    smtp_relay: Option<String>,
    #[arg(long, env = "AA_MAIL_FROM", default_value = "aa@localhost")]
    mail_from: String,
}

#[derive(Subcommand)]
enum DevCommand {
    /// Enroll a developer and print their token.
    Add {
        nick: String,
        /// mailto:, bare email, or http(s) webhook.
        #[arg(long, default_value = "")]
        notify: String,
    },
    /// Map a chat alias and print the relay token for the bot.
    Alias {
        nick: String,
        #[arg(long)]
        alias: String,
        #[arg(long, default_value = "irc")]
        network: String,
    },
    /// Issue a new token, revoking the old one.
    Rotate { nick: String },
    Notify { nick: String, address: String },
    Deactivate { nick: String },
    Activate { nick: String },
    List,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[command(flatten)]
    grouping: Grouping,
    #[arg(long, default_value_t = 2.0)]
    compliance_hours: f64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(cli.data_dir, args),
        Command::Dev(cmd) => dev(cli.data_dir, cmd),
        Command::Report(args) => report(cli.data_dir, args),
        Command::Seed => seed(cli.data_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("aa-server: {msg}");
            ExitCode::from(code)
        }
    }
}

struct Failure(u8, String);

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure(1, s)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Journal(JournalError::CorruptJournal { .. }) => {
                Failure(2, format!("{e}; restart with --recover to drop a torn final record"))
            }
            other => Failure(1, other.to_string()),
        }
    }
}

fn hours(h: f64) -> Result<i64, String> {
    if !(h.is_finite() && h > 0.0) {
        return Err("--compliance-hours must be positive".into());
    }
    Ok((h * 3600.0).round() as i64)
}

fn serve(data_dir: PathBuf, args: ServeArgs) -> Result<(), Failure> {
    let cfg = ServiceConfig {
        timeslot: args.grouping.config()?,
        rate_limit_per_min: args.rate_limit,
        base_url: args.base_url.clone().unwrap_or_else(|| format!("http://{}", args.listen)),
        compliance_secs: hours(args.compliance_hours)?,
    };
    let opts = StoreOptions {
        recovery: if args.recover { Recovery::DropTornTail } else { Recovery::Strict },
        durability: if args.no_fsync { Durability::OsBuffered } else { Durability::Sync },
    };
    let svc = open_service(&data_dir, cfg, opts, Arc::new(SystemClock))?;
    let email = match &args.smtp_relay {
        Some(relay) => {
            let (host, port) = match relay.rsplit_once(':') {
                Some((h, p)) => (h, p.parse::<u16>().map_err(|_| format!("bad SMTP port in {relay:?}"))?),
                None => (relay.as_str(), 25),
            };
            let n = EmailNotifier::new(host, port, &args.mail_from).map_err(|e| e.to_string())?;
            Some(Box::new(n) as Box<dyn aa::notify::Notifier>)
        }
        None => None,
    };
    let notifier = Arc::new(RoutingNotifier { email, webhook: Some(Box::new(WebhookNotifier::default())) });
    if args.scan_interval == 0 {
        return Err(Failure(1, "--scan-interval must be at least 1 second".into()));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.listen).await.map_err(|e| format!("bind {}: {e}", args.listen))?;
        info!(addr = %listener.local_addr().map_err(|e| e.to_string())?, "listening");
        let (stop_tx, stop_rx) = watch::channel(false);
        let scanner = tokio::spawn(run_scanner(
            svc.clone(),
            notifier,
            Duration::from_secs(args.scan_interval),
            RetryPolicy::default(),
            stop_rx.clone(),
        ));
        let app = aa::api::router(svc, args.ui_dir);
        let mut graceful = stop_rx.clone();
        let server = aa::api::serve(listener, app, async move {
            let _ = graceful.wait_for(|s| *s).await;
        });
        let signal = async move {
            shutdown_signal().await;
            info!("shutting down");
            let _ = stop_tx.send(true);
            // Open event streams never finish on their own.
            tokio::time::sleep(Duration::from_secs(5)).await;
        };
        tokio::select! {
            r = server => r.map_err(|e| e.to_string())?,
            _ = signal => {}
        }
        let _ = scanner.await;
        Ok::<(), Failure>(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => {
                let _ = ctrl_c.await;
                return;
            }
        };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
}

fn parse_nick(raw: &str) -> Result<NickName, Failure> {
    NickName::parse(raw).map_err(|e| Failure(1, e.to_string()))
}

fn dev(data_dir: PathBuf, cmd: DevCommand) -> Result<(), Failure> {
    let mut store = Store::open(&journal_path(&data_dir), StoreOptions::default())?;
    let now = SystemClock.now();
    match cmd {
        DevCommand::Add { nick, notify } => {
            let token = admin::add_developer(&mut store, &parse_nick(&nick)?, &notify, now)?;
            println!("{token}");
        }
        DevCommand::Alias { nick, alias, network } => {
            let token = admin::add_alias(&mut store, &parse_nick(&nick)?, &network, &alias, now)?;
            println!("{token}");
        }
        DevCommand::Rotate { nick } => println!("{}", admin::rotate_token(&mut store, &parse_nick(&nick)?, now)?),
        DevCommand::Notify { nick, address } => admin::set_notify_address(&mut store, &parse_nick(&nick)?, &address, now)?,
        DevCommand::Deactivate { nick } => admin::set_active(&mut store, &parse_nick(&nick)?, false, now)?,
        DevCommand::Activate { nick } => admin::set_active(&mut store, &parse_nick(&nick)?, true, now)?,
        DevCommand::List => {
            for d in admin::list(&store) {
                let aliases: Vec<String> = d.aliases.iter().map(|(n, a)| format!("{n}/{a}")).collect();
                println!(
                    "{}\t{}\t{}\t{}",
                    d.nick,
                    if d.active { "active" } else { "inactive" },
                    if d.notify_address.is_empty() { "-" } else { &d.notify_address },
                    aliases.join(",")
                );
            }
        }
    }
    Ok(())
}

fn report(data_dir: PathBuf, args: ReportArgs) -> Result<(), Failure> {
    let from = aa::ts::parse(&args.from).map_err(|e| e.to_string())?;
    let to = aa::ts::parse(&args.to).map_err(|e| e.to_string())?;
    let window = Window::new(from, to).map_err(|e| e.to_string())?;
    let state = Store::rebuild(&journal_path(&data_dir))?;
    let index = SessionIndex::new(args.grouping.config()?);
    let report = team_report(&state, &index, window, hours(args.compliance_hours)?).map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    } else {
        print!("{}", render_table(&report));
    }
    Ok(())
}

fn seed(data_dir: PathBuf) -> Result<(), Failure> {
    let mut store = Store::open(&journal_path(&data_dir), StoreOptions::default())?;
    let now = SystemClock.now();
    for nick in SAMPLE_TEAM {
        let nick = parse_nick(nick)?;
        if store.state().developer(&nick).is_none() {
            println!("{nick}\t{}", admin::add_developer(&mut store, &nick, "", now)?);
        }
    }
    let mut added = 0;
    for (i, row) in sample_feed_chronological().into_iter().enumerate() {
        let idem_key = IdemKey { client_id: "sample-feed".into(), seq: i as u64 + 1 };
        if store.state().idem_lookup(&idem_key).is_some() {
            continue;
        }
        let shout = NewShout { author: row.author(), text: row.text.to_string(), client_ts: row.at, origin: Origin::Http, idem_key };
        store.ingest_shout(shout, now)?;
        added += 1;
    }
    if added > 0 {
        info!(added, "sample feed loaded");
    } else {
        info!("sample feed already present");
    }
    Ok(())
}
