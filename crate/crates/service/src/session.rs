use std::collections::HashMap;
use std::sync::Arc;

use sparsefield::SampleSet;

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub checkpoint_id: String,
    pub grid_shape: Vec<usize>,
    /// Shared so readers can compute on a snapshot without holding the lock.
    pub samples: Arc<SampleSet>,
    pub revision: u64,
}

/// Session map with least-recently-used eviction.
#[derive(Debug)]
pub struct SessionStore {
    cap: usize,
    clock: u64,
    entries: HashMap<String, (u64, Session)>,
}

impl SessionStore {
    pub fn new(cap: usize) -> Self {
        SessionStore {
            cap: cap.max(1),
            clock: 0,
            entries: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Inserts, evicting the stalest sessions when over capacity.
    pub fn insert(&mut self, session: Session) {
        let t = self.tick();
        self.entries.insert(session.id.clone(), (t, session));
        while self.entries.len() > self.cap {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, (t, _))| *t)
                .map(|(k, _)| k.clone())
                .expect("store is non-empty");
            log::debug!("evicting session {oldest}");
            self.entries.remove(&oldest);
        }
    }

    /// Looks up a session and marks it as recently used.
    pub fn touch(&mut self, id: &str) -> Option<&mut Session> {
        let t = self.tick();
        self.entries.get_mut(id).map(|(used, s)| {
            *used = t;
            s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(id: &str) -> Session {
        Session {
            id: id.into(),
            checkpoint_id: "c".into(),
            grid_shape: vec![2, 2],
            samples: Arc::new(SampleSet::empty(2, 1)),
            revision: 0,
        }
    }

    #[test]
    fn evicts_least_recently_used() {
        let mut store = SessionStore::new(2);
        store.insert(session("a"));
        store.insert(session("b"));
        assert!(store.touch("a").is_some());
        store.insert(session("c"));
        assert_eq!(store.len(), 2);
        assert!(store.touch("b").is_none());
        assert!(store.touch("a").is_some());
        assert!(store.touch("c").is_some());
    }
}
