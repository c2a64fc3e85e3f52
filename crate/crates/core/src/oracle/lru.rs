//! Inclusive multi-level LRU over single-element blocks.

use std::collections::{BTreeMap, HashMap};

use super::Access;
use crate::cachefit::MachineDescriptor;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelStats {
    pub hits: u64,
    pub misses: u64,
}

impl LevelStats {
    pub fn miss_ratio(&self) -> f64 {
        let n = self.hits + self.misses;
        if n == 0 {
            0.0
        } else {
            self.misses as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LruStats {
    pub levels: Vec<LevelStats>,
}

/// Fully associative LRU set keyed by interned element ids.
struct Lru {
    capacity: usize,
    stamp_of: HashMap<u64, u64>,
    by_stamp: BTreeMap<u64, u64>,
}

impl Lru {
    fn new(capacity: usize) -> Self {
        Self { capacity, stamp_of: HashMap::new(), by_stamp: BTreeMap::new() }
    }

    fn contains(&self, key: u64) -> bool {
        self.stamp_of.contains_key(&key)
    }

    fn touch(&mut self, key: u64, now: u64) {
        if let Some(old) = self.stamp_of.insert(key, now) {
            self.by_stamp.remove(&old);
        }
        self.by_stamp.insert(now, key);
    }

    /// Inserts `key` and returns the evicted element, if any.
    fn insert(&mut self, key: u64, now: u64) -> Option<u64> {
        if self.capacity == 0 {
            return None;
        }
        let mut victim = None;
        if !self.contains(key) && self.stamp_of.len() == self.capacity {
            let (_, k) = self.by_stamp.pop_first().expect("full cache is nonempty");
            self.stamp_of.remove(&k);
            victim = Some(k);
        }
        self.touch(key, now);
        victim
    }

    fn remove(&mut self, key: u64) {
        if let Some(s) = self.stamp_of.remove(&key) {
            self.by_stamp.remove(&s);
        }
    }
}

/// Replays `trace`; a level is consulted only after a miss in the level
/// before it, and evictions from an outer level invalidate inner copies.
pub fn lru_simulate(trace: &[Access], m: &MachineDescriptor) -> LruStats {
    let mut caches: Vec<Lru> =
        m.levels.iter().map(|l| Lru::new((l.size_bytes / m.element_bytes) as usize)).collect();
    let mut stats = vec![LevelStats::default(); caches.len()];
    let mut ids: HashMap<(&str, &[i64]), u64> = HashMap::new();
    for (now, a) in trace.iter().enumerate() {
        let now = now as u64;
        let next = ids.len() as u64;
        let key = *ids.entry((a.array.as_str(), a.index.as_slice())).or_insert(next);
        let hit_at = caches.iter().position(|c| c.contains(key));
        let fill_to = hit_at.unwrap_or(caches.len());
        for s in &mut stats[..fill_to] {
            s.misses += 1;
        }
        if let Some(h) = hit_at {
            stats[h].hits += 1;
            caches[h].touch(key, now);
        }
        // fill outermost first so inner copies stay covered
        for lvl in (0..fill_to).rev() {
            if let Some(v) = caches[lvl].insert(key, now) {
                for inner in &mut caches[..lvl] {
                    inner.remove(v);
                }
            }
        }
    }
    LruStats { levels: stats }
}
