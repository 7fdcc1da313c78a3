use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use aa::bot::{Bot, BotConfig};
use aa::ts::SystemClock;
use clap::Parser;
use tracing::info;

#[derive(Parser)]
#[command(name = "aa-bot", version, about = "IRC relay that logs `shout <text>` messages")]
struct Cli {
    /// Bot config (TOML).
    #[arg(long, env = "AA_BOT_CONFIG")]
    config: PathBuf,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let (cfg, aliases) = match BotConfig::load(&cli.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("aa-bot: {e}");
            return ExitCode::from(3);
        }
    };
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    std::thread::spawn(move || {
        let Ok(rt) = tokio::runtime::Builder::new_current_thread().enable_io().build() else { return };
        rt.block_on(async {
            let _ = tokio::signal::ctrl_c().await;
        });
        info!("stopping");
        flag.store(true, Ordering::SeqCst);
    });
    let bot = Bot::new(cfg, aliases);
    let mut sleep = |d: Duration| {
        let until = Instant::now() + d;
        while Instant::now() < until && !stop.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(200));
        }
    };
    bot.run(&SystemClock, &stop.clone(), &mut sleep);
    ExitCode::SUCCESS
}
