use std::path::PathBuf;
use std::process::ExitCode;

use aa::client::{alert_loop, log_lines, status_lines, Client, ClientError, ClientQueue, HttpTransport, Overrides, Settings, ShoutTransport};
use aa::ts::{Clock, SystemClock};
use aa_core::TimeslotConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aa", version, about = "Log what you are doing, online or offline")]
struct Cli {
    #[arg(long, env = "AA_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Directory for the local queue (and config.toml unless --config).
    #[arg(long, env = "AA_HOME", global = true)]
    home: Option<PathBuf>,
    #[arg(long, env = "AA_SERVER", global = true)]
    server: Option<String>,
    #[arg(long, env = "AA_TOKEN", global = true, hide_env_values = true)]
    token: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log a shout; queued locally when the server is unreachable.
    Shout {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        text: Vec<String>,
    },
    /// Send queued shouts.
    Push,
    #[command(subcommand)]
    Session(SessionCommand),
    /// Session, queue and server state.
    Status,
    /// The latest local shouts.
    Log {
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Mark a session start and ring at each timeslot until stopped.
    Start {
        /// Minutes between alerts.
        #[arg(long)]
        timeslot: Option<u32>,
        /// Only send the marker; do not run the alert loop.
        #[arg(long)]
        no_alerts: bool,
    },
    /// Mark the session end.
    Stop,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("aa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn open_client(settings: &Settings) -> Result<Client<HttpTransport>, ClientError> {
    let (url, token) = settings.endpoint()?;
    let queue = ClientQueue::open(&settings.home, settings.client_id.as_deref(), SystemClock.now())?;
    Ok(Client::new(queue, HttpTransport::new(&url, &token)))
}

fn run(cli: Cli) -> Result<u8, ClientError> {
    let settings = Settings::load(Overrides { config: cli.config, home: cli.home, server_url: cli.server, auth_token: cli.token })?;
    let clock = SystemClock;
    match cli.command {
        Command::Shout { text } => {
            let text = aa_core::normalize_shout_text(&text.join(" "))?;
            let mut client = open_client(&settings)?;
            println!("{}", client.shout(&text, clock.now())?.line());
        }
        Command::Push => {
            if ClientQueue::snapshot(&settings.home)?.depth() == 0 {
                println!("{{\"sent\":0,\"remaining\":0}}");
                return Ok(0);
            }
            let mut client = open_client(&settings)?;
            let report = client.push(clock.now())?;
            for e in &report.errors {
                eprintln!("aa: {e}");
            }
            println!("{{\"sent\":{},\"remaining\":{}}}", report.sent, report.remaining);
            return Ok(u8::from(report.remaining > 0));
        }
        Command::Session(SessionCommand::Start { timeslot, no_alerts }) => {
            let minutes = timeslot.unwrap_or(settings.timeslot);
            let cfg = TimeslotConfig::new(minutes, minutes.max(59) + 1).map_err(|e| ClientError::InvalidText(e.to_string()))?;
            let started = clock.now();
            let status = open_client(&settings)?.session_start(started)?;
            println!("session: start ({})", status.line());
            if !no_alerts {
                let mut out = std::io::stdout();
                alert_loop(&settings.home, cfg, started, &clock, &mut out, &mut std::thread::sleep)?;
            }
        }
        Command::Session(SessionCommand::Stop) => {
            let status = open_client(&settings)?.session_stop(clock.now())?;
            println!("session: stop ({})", status.line());
        }
        Command::Status => {
            let view = ClientQueue::snapshot(&settings.home)?;
            let reach = settings.endpoint().ok().map(|(url, token)| HttpTransport::new(&url, &token).health());
            for line in status_lines(&view, reach) {
                println!("{line}");
            }
        }
        Command::Log { n } => {
            for line in log_lines(&ClientQueue::snapshot(&settings.home)?, n) {
                println!("{line}");
            }
        }
    }
    Ok(0)
}
