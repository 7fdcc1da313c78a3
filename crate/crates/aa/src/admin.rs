//! Developer provisioning. Tokens are printed once and only their digests
//! are journaled.

use aa_core::{NickName, Timestamp};

use crate::secret::{digest, new_token};
use crate::store::{AliasRecord, Developer, DeveloperRecord, Entry, Store, StoreError};

fn missing(nick: &NickName) -> StoreError {
    StoreError::invalid("developer_upsert", format!("no developer {nick}"))
}

/// Enrolls a developer and returns their API token.
pub fn add_developer(store: &mut Store, nick: &NickName, notify_address: &str, now: Timestamp) -> Result<String, StoreError> {
    if store.state().developer(nick).is_some() {
        return Err(StoreError::invalid("developer_upsert", format!("developer {nick} already exists")));
    }
    let token = new_token();
    store.append(
        now,
        Entry::DeveloperUpsert(DeveloperRecord {
            nick: nick.clone(),
            token_sha256: digest(&token),
            aliases: Vec::new(),
            notify_address: notify_address.trim().to_string(),
            active: true,
        }),
    )?;
    Ok(token)
}

/// Issues a new API token; the old one stops working.
pub fn rotate_token(store: &mut Store, nick: &NickName, now: Timestamp) -> Result<String, StoreError> {
    let mut rec = store.state().developer_record(nick).ok_or_else(|| missing(nick))?;
    let token = new_token();
    rec.token_sha256 = digest(&token);
    store.append(now, Entry::DeveloperUpsert(rec))?;
    Ok(token)
}

/// Maps a chat alias to a developer and returns the relay token the bot
/// uses for that alias.
pub fn add_alias(store: &mut Store, nick: &NickName, network: &str, alias: &str, now: Timestamp) -> Result<String, StoreError> {
    let mut rec = store.state().developer_record(nick).ok_or_else(|| missing(nick))?;
    let alias = alias.trim().to_ascii_lowercase();
    if alias.is_empty() || network.trim().is_empty() {
        return Err(StoreError::invalid("developer_upsert", "network and alias must be non-empty"));
    }
    let token = new_token();
    rec.aliases.retain(|a| !(a.network == network && a.alias == alias));
    rec.aliases.push(AliasRecord { network: network.to_string(), alias, relay_token_sha256: digest(&token) });
    store.append(now, Entry::DeveloperUpsert(rec))?;
    Ok(token)
}

pub fn set_active(store: &mut Store, nick: &NickName, active: bool, now: Timestamp) -> Result<(), StoreError> {
    let mut rec = store.state().developer_record(nick).ok_or_else(|| missing(nick))?;
    rec.active = active;
    store.append(now, Entry::DeveloperUpsert(rec))?;
    Ok(())
}

pub fn set_notify_address(store: &mut Store, nick: &NickName, address: &str, now: Timestamp) -> Result<(), StoreError> {
    let mut rec = store.state().developer_record(nick).ok_or_else(|| missing(nick))?;
    rec.notify_address = address.trim().to_string();
    store.append(now, Entry::DeveloperUpsert(rec))?;
    Ok(())
}

pub fn list(store: &Store) -> Vec<Developer> {
    store.state().developers().cloned().collect()
}
