use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use aa_core::{group_sessions, NickName, Session, Shout, TimeslotConfig, Window};

use super::State;

#[derive(Debug)]
struct AuthorSessions {
    shout_count: usize,
    sessions: Vec<Session>,
    by_shout: HashMap<u64, usize>,
}

/// Per-author session groupings, recomputed when that author's shout count
/// changes. Screencast and validation decorations are applied on every read.
#[derive(Debug)]
pub struct SessionIndex {
    cfg: TimeslotConfig,
    cache: Mutex<HashMap<NickName, Arc<AuthorSessions>>>,
}

impl SessionIndex {
    pub fn new(cfg: TimeslotConfig) -> Self {
        SessionIndex { cfg, cache: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &TimeslotConfig {
        &self.cfg
    }

    fn grouped(&self, state: &State, author: &NickName) -> Arc<AuthorSessions> {
        let count = state.author_shout_count(author);
        let mut cache = self.cache.lock().expect("session cache poisoned");
        if let Some(hit) = cache.get(author) {
            if hit.shout_count == count {
                return hit.clone();
            }
        }
        let shouts: Vec<Shout> = state.shouts_by(author).cloned().collect();
        let sessions = group_sessions(&shouts, &self.cfg).expect("single author");
        let by_shout = sessions
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.shout_ids.iter().map(move |id| (*id, i)))
            .collect();
        let entry = Arc::new(AuthorSessions { shout_count: count, sessions, by_shout });
        cache.insert(author.clone(), entry.clone());
        entry
    }

    fn decorate(state: &State, mut s: Session) -> Session {
        s.screencast_url = state.screencast(&s.session_id).map(str::to_string);
        s.validation_state = state.validation_state(&s.session_id);
        s
    }

    /// Full (unclipped) sessions of one author, chronological.
    pub fn for_author(&self, state: &State, author: &NickName) -> Vec<Session> {
        self.grouped(state, author).sessions.iter().cloned().map(|s| Self::decorate(state, s)).collect()
    }

    /// Sessions clipped to `window`, for one author or everyone, ordered by
    /// start time then author.
    pub fn list(&self, state: &State, author: Option<&NickName>, window: Window) -> Vec<Session> {
        let authors: Vec<NickName> = match author {
            Some(a) => vec![a.clone()],
            None => state.authors().cloned().collect(),
        };
        let mut out: Vec<Session> = authors
            .iter()
            .flat_map(|a| self.for_author(state, a))
            .filter_map(|s| s.clipped(window))
            .collect();
        out.sort_by(|a, b| a.started_at.cmp(&b.started_at).then_with(|| a.author.cmp(&b.author)));
        out
    }

    pub fn find(&self, state: &State, session_id: &str) -> Option<Session> {
        state.authors().find_map(|a| {
            self.grouped(state, a)
                .sessions
                .iter()
                .find(|s| s.session_id == session_id)
                .cloned()
                .map(|s| Self::decorate(state, s))
        })
    }

    pub fn session_id_of(&self, state: &State, shout: &Shout) -> Option<String> {
        let g = self.grouped(state, &shout.author);
        g.by_shout.get(&shout.id).map(|i| g.sessions[*i].session_id.clone())
    }
}
