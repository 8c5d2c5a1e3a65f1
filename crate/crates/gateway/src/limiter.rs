use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use drlia_core::clock::Clock;
use parking_lot::Mutex;

const PRUNE_ABOVE: usize = 4096;

/// Sliding one-second window per remote address, on the service clock.
pub struct RateLimiter {
    limit: usize,
    clock: Arc<dyn Clock>,
    hits: Mutex<HashMap<IpAddr, VecDeque<DateTime<Utc>>>>,
}

impl RateLimiter {
    pub fn new(per_second: u32, clock: Arc<dyn Clock>) -> Self {
        Self {
            limit: per_second as usize,
            clock,
            hits: Mutex::new(HashMap::new()),
        }
    }

    /// Records a request from `addr`; false when it exceeds the limit.
    pub fn admit(&self, addr: IpAddr) -> bool {
        let now = self.clock.now();
        let window = Duration::seconds(1);
        let mut hits = self.hits.lock();
        if hits.len() > PRUNE_ABOVE {
            hits.retain(|_, q| q.back().is_some_and(|t| now - *t < window));
        }
        let q = hits.entry(addr).or_default();
        while q.front().is_some_and(|t| now - *t >= window) {
            q.pop_front();
        }
        if q.len() >= self.limit {
            return false;
        }
        q.push_back(now);
        true
    }
}
