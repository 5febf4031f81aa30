//! Replay detection by remembering every fresh value already accepted.

use std::collections::HashSet;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheVerdict {
    Accepted,
    Rejected,
}

/// An unbounded cache: entries never expire within a run.
#[derive(Clone, Debug, Default)]
pub struct NonceCache {
    seen: HashSet<String>,
}

impl NonceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn offer(&mut self, value: &str) -> CacheVerdict {
        if self.seen.insert(value.to_string()) {
            CacheVerdict::Accepted
        } else {
            CacheVerdict::Rejected
        }
    }
}

/// Runs a stream of `(reception, fresh value)` events through a fresh cache.
pub fn nonce_cache_run<R>(events: &[(R, String)]) -> Vec<CacheVerdict> {
    let mut cache = NonceCache::new();
    events.iter().map(|(_, v)| cache.offer(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use CacheVerdict::*;

    fn ev(vs: &[&str]) -> Vec<(usize, String)> {
        vs.iter()
            .enumerate()
            .map(|(i, v)| (i, v.to_string()))
            .collect()
    }

    #[test]
    fn second_delivery_is_rejected() {
        assert_eq!(nonce_cache_run(&ev(&["n"])), [Accepted]);
        assert_eq!(nonce_cache_run(&ev(&["n", "n"])), [Accepted, Rejected]);
        assert_eq!(nonce_cache_run(&ev(&["n", "m"])), [Accepted, Accepted]);
        assert!(nonce_cache_run::<usize>(&[]).is_empty());
    }
}
