mod common;

use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use aa::bot::{handle_message, AliasEntry, AliasMap, Bot, BotConfig, Decision, Relay, SessionEnd};
use aa::service::ServiceConfig;
use aa::ts::ManualClock;
use aa_core::Origin;
use common::*;
use proptest::prelude::*;

fn bot_config(home: &Path, port: u16, api_url: &str) -> BotConfig {
    BotConfig {
        server: "127.0.0.1".into(),
        port,
        nick: "aabot".into(),
        channels: vec!["#lab".into()],
        network: "irc".into(),
        api_url: api_url.into(),
        home: home.into(),
        alias_file: None,
        aliases: Vec::new(),
    }
}

fn mapped(h: &Harness, irc_nick: &str, developer: &str) -> AliasEntry {
    let token = aa::admin::add_alias(&mut h.svc().write(), &nick(developer), "irc", irc_nick, after_sample()).unwrap();
    AliasEntry { irc_nick: irc_nick.into(), developer: nick(developer), relay_token: token }
}

#[test]
fn relays_only_mapped_shouts() {
    let h = Harness::sample_team(after_sample()).serve();
    let aliases = AliasMap::new([mapped(&h, "hybrid", "hybrid")]).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let home = tempfile::tempdir().unwrap();
    let bot = Bot::new(bot_config(home.path(), port, &h.url()), aliases);

    let script = thread::spawn(move || {
        let mut irc = Peer::accept(&listener);
        irc.register();
        irc.send("PING :stub");
        irc.expect("PONG :stub");
        irc.send(":stranger!s@h PRIVMSG aabot :shout let me in");
        irc.expect("PRIVMSG stranger :sorry");
        irc.send(":hybrid!h@h PRIVMSG #lab :bom dia pessoal");
        irc.send(":hybrid!h@h PRIVMSG #lab :shout not addressed to the bot");
        irc.send(":hybrid!h@h PRIVMSG aabot :shout ");
        assert!(irc.expect("PRIVMSG hybrid :").contains("empty"));
        irc.send(":hybrid!h@h PRIVMSG aabot :shout respondidos os interessados na pesquisa de redes");
        let ack = irc.expect("PRIVMSG hybrid :");
        assert!(ack.contains("logged for hybrid"), "{ack}");
    });
    let clock = ManualClock::new(after_sample());
    let stop = AtomicBool::new(false);
    let end = bot.run_connection(TcpStream::connect(("127.0.0.1", port)).unwrap(), &clock, &stop).unwrap();
    script.join().unwrap();
    assert_eq!(end, SessionEnd::Disconnected { registered: true });

    let feed = h.svc().feed(&Default::default()).unwrap();
    assert_eq!(feed.entries.len(), 1);
    let e = &feed.entries[0];
    assert_eq!((e.author.as_str(), e.text.as_str(), e.origin), ("hybrid", "respondidos os interessados na pesquisa de redes", Origin::Bot));
    assert_eq!(e.client_ts, after_sample());
}

#[test]
fn reconnects_with_backoff_and_flushes_on_stop() {
    let h = Harness::sample_team(after_sample()).serve();
    let aliases = AliasMap::new([mapped(&h, "v1z", "v1z")]).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let home = tempfile::tempdir().unwrap();
    let bot = Bot::new(bot_config(home.path(), port, &h.url()), aliases);
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();

    let script = thread::spawn(move || {
        let mut first = Peer::accept(&listener);
        first.register();
        drop(first);
        let mut second = Peer::accept(&listener);
        second.register();
        second.send(":v1z!v@h PRIVMSG aabot :shout back online");
        second.expect("PRIVMSG v1z :");
        flag.store(true, Ordering::SeqCst);
        second.expect("QUIT");
    });
    let mut delays = Vec::new();
    let clock = ManualClock::new(after_sample());
    bot.run(&clock, &stop, &mut |d| delays.push(d));
    script.join().unwrap();
    assert_eq!(delays, [Duration::from_secs(1)]);
    assert_eq!(h.svc().feed(&Default::default()).unwrap().entries[0].text, "back online");
}

#[test]
fn unreachable_server_queues_until_flush() {
    let h = Harness::sample_team(after_sample()).serve();
    let alias = mapped(&h, "v1z", "v1z");
    let aliases = AliasMap::new([alias.clone()]).unwrap();
    let home = tempfile::tempdir().unwrap();
    let dead = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}", l.local_addr().unwrap())
    };
    let down = Relay { home: home.path().into(), network: "irc".into(), api_url: dead };
    let reply = down.relay(&alias, "logged while offline", after_sample());
    assert!(reply.contains("queued"), "{reply}");
    assert_eq!(down.flush(&aliases, after_sample()), 1);
    assert!(h.svc().feed(&Default::default()).unwrap().entries.is_empty());

    let up = Relay { home: home.path().into(), network: "irc".into(), api_url: h.url() };
    assert_eq!(up.flush(&aliases, after_sample()), 0);
    assert_eq!(up.flush(&aliases, after_sample()), 0);
    let feed = h.svc().feed(&Default::default()).unwrap();
    assert_eq!(feed.entries.len(), 1);
    assert_eq!(feed.entries[0].text, "logged while offline");
}

#[test]
fn revoked_alias_is_refused_by_the_server() {
    let h = Harness::new(ServiceConfig::default(), &[("v1z", "")], after_sample()).serve();
    let alias = mapped(&h, "v1z", "v1z");
    // Re-mapping issues a new relay token; the old one stops working.
    mapped(&h, "v1z", "v1z");
    let home = tempfile::tempdir().unwrap();
    let relay = Relay { home: home.path().into(), network: "irc".into(), api_url: h.url() };
    let reply = relay.relay(&alias, "should not land", after_sample());
    assert!(reply.contains("queued") || reply.contains("error"), "{reply}");
    assert!(h.svc().feed(&Default::default()).unwrap().entries.is_empty());
}

#[test]
fn config_file_with_alias_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bot.toml"),
        "server = \"irc.example.org\"\nnick = \"aabot\"\nchannels = [\"#lab\"]\napi_url = \"http://localhost:8080\"\nhome = \"/tmp/aa-bot\"\nalias_file = \"aliases.toml\"\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("aliases.toml"),
        "[[alias]]\nirc_nick = \"Hybrid\"\ndeveloper = \"hybrid\"\nrelay_token = \"abc\"\n",
    )
    .unwrap();
    let (cfg, aliases) = BotConfig::load(&dir.path().join("bot.toml")).unwrap();
    assert_eq!((cfg.port, cfg.network.as_str()), (6667, "irc"));
    assert_eq!(aliases.get("HYBRID").unwrap().developer.as_str(), "hybrid");
}

proptest! {
    #[test]
    fn unmapped_nicks_never_relay(from in "[a-zA-Z][a-zA-Z0-9_]{0,12}", text in "shout [ -~]{0,40}", pm in any::<bool>()) {
        prop_assume!(!from.eq_ignore_ascii_case("hybrid"));
        let aliases = AliasMap::new([AliasEntry { irc_nick: "hybrid".into(), developer: nick("hybrid"), relay_token: "t".into() }]).unwrap();
        let (target, line) = if pm { ("aabot".to_string(), text) } else { ("#lab".to_string(), format!("aabot: {text}")) };
        let decision = handle_message("aabot", &aliases, &from, &target, &line);
        let relayed = matches!(decision, Decision::Relay { .. });
        prop_assert!(!relayed, "{:?}", decision);
    }
}
