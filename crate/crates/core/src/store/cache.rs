//! LRU bucket cache. Residency here is what the cost model calls ϕ: a
//! resident bucket costs nothing to read.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::{Bucket, BucketSource};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BucketCache {
    capacity: usize,
    tick: u64,
    // bucket -> last-use tick, and the inverse for O(log n) victim lookup
    last_use: HashMap<usize, u64>,
    by_age: BTreeMap<u64, usize>,
    payload: HashMap<usize, Arc<Bucket>>,
    hits: u64,
    misses: u64,
}

impl BucketCache {
    pub fn new(capacity_buckets: usize) -> Self {
        BucketCache {
            capacity: capacity_buckets,
            tick: 0,
            last_use: HashMap::new(),
            by_age: BTreeMap::new(),
            payload: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.last_use.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_use.is_empty()
    }

    /// Residency check with no side effects.
    pub fn is_resident(&self, index: usize) -> bool {
        self.last_use.contains_key(&index)
    }

    /// Resident bucket indices, least recently used first.
    pub fn resident(&self) -> Vec<usize> {
        self.by_age.values().copied().collect()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// `hits / (hits + misses)`, or 0 before any access.
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    fn refresh(&mut self, index: usize) {
        self.tick += 1;
        if let Some(old) = self.last_use.insert(index, self.tick) {
            self.by_age.remove(&old);
        }
        self.by_age.insert(self.tick, index);
    }

    fn admit(&mut self, index: usize) {
        if self.capacity == 0 {
            return;
        }
        if self.last_use.len() >= self.capacity {
            if let Some((_, victim)) = self.by_age.pop_first() {
                self.last_use.remove(&victim);
                self.payload.remove(&victim);
            }
        }
        self.refresh(index);
    }

    /// Records an access for residency purposes only: a hit refreshes
    /// recency, a miss admits the bucket (evicting the LRU entry when full).
    /// Returns whether it was a hit.
    pub fn touch(&mut self, index: usize) -> bool {
        if self.is_resident(index) {
            self.hits += 1;
            self.refresh(index);
            true
        } else {
            self.misses += 1;
            self.admit(index);
            false
        }
    }

    /// Like [`touch`](Self::touch) but a miss does not admit the bucket.
    /// Index probes read individual records, not the whole bucket.
    pub fn probe(&mut self, index: usize) -> bool {
        if self.is_resident(index) {
            self.hits += 1;
            self.refresh(index);
            true
        } else {
            self.misses += 1;
            false
        }
    }

    /// Returns the bucket and whether it was already resident. On a miss the
    /// bucket is loaded from `source` and admitted.
    pub fn fetch(&mut self, source: &dyn BucketSource, index: usize) -> Result<(Arc<Bucket>, bool)> {
        if self.is_resident(index) {
            let bucket = match self.payload.get(&index) {
                Some(b) => b.clone(),
                None => {
                    // resident through `touch`, payload never loaded
                    let b = source.load(index)?;
                    if self.capacity > 0 {
                        self.payload.insert(index, b.clone());
                    }
                    b
                }
            };
            self.hits += 1;
            self.refresh(index);
            return Ok((bucket, true));
        }
        let bucket = source.load(index)?;
        self.misses += 1;
        self.admit(index);
        if self.is_resident(index) {
            self.payload.insert(index, bucket.clone());
        }
        Ok((bucket, false))
    }

    /// Cached payload of a resident bucket, if it has been loaded.
    pub fn get(&self, index: usize) -> Option<Arc<Bucket>> {
        self.payload.get(&index).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::tests::random_catalog;
    use crate::store::{partition_catalog, InMemoryBuckets};
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn source() -> InMemoryBuckets {
        InMemoryBuckets::new(partition_catalog(random_catalog(100, 1), 10).unwrap(), 10)
    }

    #[test]
    fn second_fetch_hits() {
        let src = source();
        let mut c = BucketCache::new(4);
        let (b, hit) = c.fetch(&src, 5).unwrap();
        assert!(!hit);
        assert_eq!(b.index, 5);
        assert!(c.fetch(&src, 5).unwrap().1);
        assert_eq!((c.hits(), c.misses()), (1, 1));
    }

    #[test]
    fn evicts_least_recently_used() {
        let src = source();
        let mut c = BucketCache::new(2);
        for i in [1, 2, 3] {
            assert!(!c.fetch(&src, i).unwrap().1);
        }
        assert!(!c.fetch(&src, 1).unwrap().1, "1 was evicted by 3");
        assert_eq!(c.resident(), vec![3, 1]);
        assert!(c.get(2).is_none());
    }

    #[test]
    fn probe_does_not_admit() {
        let mut c = BucketCache::new(2);
        assert!(!c.probe(7));
        assert!(!c.is_resident(7));
        c.touch(7);
        assert!(c.probe(7));
        assert_eq!((c.hits(), c.misses()), (1, 2));
    }

    #[test]
    fn zero_capacity_never_hits() {
        let src = source();
        let mut c = BucketCache::new(0);
        assert!(!c.touch(1));
        assert!(!c.touch(1));
        assert!(!c.fetch(&src, 1).unwrap().1);
        assert_eq!(c.hit_rate(), 0.0);
    }

    #[test]
    fn fetch_error_propagates() {
        let src = source();
        let mut c = BucketCache::new(2);
        assert!(c.fetch(&src, 99).is_err());
        assert_eq!(c.misses(), 0);
    }

    /// Textbook LRU: a recency list with the most recent entry at the front.
    fn reference_lru(capacity: usize, trace: &[usize]) -> Vec<bool> {
        let mut list: VecDeque<usize> = VecDeque::new();
        trace
            .iter()
            .map(|&b| {
                if let Some(pos) = list.iter().position(|&x| x == b) {
                    list.remove(pos);
                    list.push_front(b);
                    true
                } else {
                    if capacity > 0 {
                        if list.len() == capacity {
                            list.pop_back();
                        }
                        list.push_front(b);
                    }
                    false
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matches_reference_lru(capacity in 0usize..8, trace in proptest::collection::vec(0usize..12, 0..300)) {
            let mut c = BucketCache::new(capacity);
            let got: Vec<bool> = trace.iter().map(|&b| c.touch(b)).collect();
            let want = reference_lru(capacity, &trace);
            prop_assert_eq!(&got, &want);
            let hits = want.iter().filter(|h| **h).count() as u64;
            prop_assert_eq!(c.hits(), hits);
            prop_assert_eq!(c.misses(), trace.len() as u64 - hits);
            prop_assert!(c.len() <= capacity);
        }
    }
}
