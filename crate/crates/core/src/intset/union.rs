use std::collections::BTreeMap;
use std::fmt;

use super::{IntRel, IntSet, IntSetError, Space};

/// Sets over different tuple spaces, keyed by space name (one entry per
/// array in a footprint).
#[derive(Debug, Clone, Default)]
pub struct UnionSet {
    sets: BTreeMap<String, IntSet>,
}

impl UnionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `set`, merging with any set already stored under the same name.
    pub fn insert(&mut self, set: IntSet) -> Result<(), IntSetError> {
        let key = set.space().name().to_string();
        let merged = match self.sets.remove(&key) {
            Some(prev) => prev.union(&set)?,
            None => set,
        };
        self.sets.insert(key, merged);
        Ok(())
    }

    pub fn union(&self, other: &UnionSet) -> Result<UnionSet, IntSetError> {
        let mut out = self.clone();
        for s in other.sets.values() {
            out.insert(s.clone())?;
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<&IntSet> {
        self.sets.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IntSet)> {
        self.sets.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Distinct points summed across spaces.
    pub fn cardinality(&self) -> u64 {
        self.sets.values().map(IntSet::cardinality).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.values().all(IntSet::is_empty)
    }
}

impl fmt::Display for UnionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sets.values().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(" ∪ "))
    }
}

/// Relations from one input space into several output spaces, keyed by
/// output space name.
#[derive(Debug, Clone)]
pub struct UnionRel {
    in_space: Space,
    rels: BTreeMap<String, IntRel>,
}

impl UnionRel {
    pub fn new(in_space: Space) -> Self {
        Self { in_space, rels: BTreeMap::new() }
    }

    pub fn in_space(&self) -> &Space {
        &self.in_space
    }

    pub fn insert(&mut self, rel: IntRel) -> Result<(), IntSetError> {
        self.in_space.check_same(rel.in_space())?;
        let key = rel.out_space().name().to_string();
        let merged = match self.rels.remove(&key) {
            Some(prev) => prev.union(&rel)?,
            None => rel,
        };
        self.rels.insert(key, merged);
        Ok(())
    }

    pub fn union(&self, other: &UnionRel) -> Result<UnionRel, IntSetError> {
        let mut out = self.clone();
        for r in other.rels.values() {
            out.insert(r.clone())?;
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<&IntRel> {
        self.rels.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IntRel)> {
        self.rels.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    /// Image of `set` in every output space.
    pub fn apply(&self, set: &IntSet) -> Result<UnionSet, IntSetError> {
        let mut out = UnionSet::new();
        for r in self.rels.values() {
            out.insert(r.apply(set)?)?;
        }
        Ok(out)
    }
}

impl fmt::Display for UnionRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rels.values().map(|r| r.to_string()).collect();
        f.write_str(&parts.join(" ∪ "))
    }
}
