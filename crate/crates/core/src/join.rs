//! Cross-matching one drained bucket batch.
//!
//! Large batches are merged against the whole bucket in a single pass over
//! the id-sorted objects; small batches binary-search each probe's id range
//! instead. Both emit the same matches: every catalog object within the
//! probe's radius.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::htm::{angular_distance, HtmId};
use crate::store::Bucket;
use crate::workload::{Predicate, QueryId, WorkloadItem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinStrategy {
    Scan,
    Index,
}

impl JoinStrategy {
    pub fn name(self) -> &'static str {
        match self {
            JoinStrategy::Scan => "scan",
            JoinStrategy::Index => "index",
        }
    }
}

/// Index below `threshold * capacity` items, scan at or above it.
pub fn choose_strategy(batch_size: usize, bucket_capacity: usize, threshold: f64) -> JoinStrategy {
    if (batch_size as f64) < threshold * bucket_capacity as f64 {
        JoinStrategy::Index
    } else {
        JoinStrategy::Scan
    }
}

/// Catalog objects matched by one probe of one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub query: QueryId,
    pub probe: u32,
    /// Object ids, ascending.
    pub matched: Vec<u64>,
}

impl MatchResult {
    pub fn count(&self) -> usize {
        self.matched.len()
    }
}

/// Groups `(query, probe, object)` triples into sorted results.
fn group(mut pairs: Vec<(QueryId, u32, u64)>) -> Vec<MatchResult> {
    pairs.sort_unstable();
    let mut out: Vec<MatchResult> = Vec::new();
    for (query, probe, id) in pairs {
        match out.last_mut() {
            Some(r) if r.query == query && r.probe == probe => r.matched.push(id),
            _ => out.push(MatchResult { query, probe, matched: vec![id] }),
        }
    }
    out
}

fn is_match(item: &WorkloadItem, obj: &crate::store::CatalogObject) -> bool {
    angular_distance(&item.object.pos, &obj.pos) <= item.object.radius
}

/// Plane-sweep merge of the batch (ordered by range start) against the
/// bucket's id-sorted objects. Results are sorted by query, then probe.
pub fn sweep_join(bucket: &Bucket, batch: &[WorkloadItem]) -> Result<Vec<MatchResult>> {
    if !bucket.is_sorted() {
        return Err(Error::Invariant(format!("bucket {} objects are not id-sorted", bucket.index)));
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by_key(|&i| batch[i].object.range.lo);

    let objs = &bucket.objects;
    let mut pairs = Vec::new();
    // active items, smallest range end on top
    let mut active: BinaryHeap<Reverse<(HtmId, usize)>> = BinaryHeap::new();
    let mut next = 0;
    let mut k = 0;
    while k < objs.len() {
        let id = objs[k].htm;
        if active.is_empty() {
            match order.get(next) {
                None => break,
                Some(&i) if batch[i].object.range.lo > id => {
                    // nothing can match until the next range opens
                    let lo = batch[i].object.range.lo;
                    k += objs[k..].partition_point(|o| o.htm < lo);
                    continue;
                }
                Some(_) => {}
            }
        }
        while let Some(&i) = order.get(next) {
            if batch[i].object.range.lo > id {
                break;
            }
            active.push(Reverse((batch[i].object.range.hi, i)));
            next += 1;
        }
        while let Some(&Reverse((hi, _))) = active.peek() {
            if hi >= id {
                break;
            }
            active.pop();
        }
        for Reverse((_, i)) in active.iter() {
            let it = &batch[*i];
            if is_match(it, &objs[k]) {
                pairs.push((it.query, it.probe, objs[k].object_id));
            }
        }
        k += 1;
    }
    Ok(group(pairs))
}

/// Id-ordered search structure over one bucket.
#[derive(Clone, Copy, Debug)]
pub struct BucketIndex<'a> {
    bucket: &'a Bucket,
}

impl<'a> BucketIndex<'a> {
    pub fn new(bucket: &'a Bucket) -> Result<Self> {
        if !bucket.is_sorted() {
            return Err(Error::Invariant(format!("bucket {} objects are not id-sorted", bucket.index)));
        }
        Ok(BucketIndex { bucket })
    }

    pub fn bucket(&self) -> &'a Bucket {
        self.bucket
    }
}

/// Range search per probe, then the same distance refinement as
/// [`sweep_join`].
pub fn index_join(index: &BucketIndex<'_>, batch: &[WorkloadItem]) -> Vec<MatchResult> {
    let objs = &index.bucket.objects;
    let mut pairs = Vec::new();
    for it in batch {
        let r = it.object.range;
        let start = objs.partition_point(|o| o.htm < r.lo);
        for o in objs[start..].iter().take_while(|o| o.htm <= r.hi) {
            if is_match(it, o) {
                pairs.push((it.query, it.probe, o.object_id));
            }
        }
    }
    group(pairs)
}

/// Runs the join with the given strategy.
pub fn evaluate_batch(bucket: &Bucket, batch: &[WorkloadItem], strategy: JoinStrategy) -> Result<Vec<MatchResult>> {
    match strategy {
        JoinStrategy::Scan => sweep_join(bucket, batch),
        JoinStrategy::Index => Ok(index_join(&BucketIndex::new(bucket)?, batch)),
    }
}

/// Drops matched objects rejected by their query's predicate, and results
/// left with no matches.
pub fn apply_predicate(results: Vec<MatchResult>, predicate_of: impl Fn(QueryId) -> Predicate) -> Vec<MatchResult> {
    results
        .into_iter()
        .filter_map(|mut r| {
            let p = predicate_of(r.query);
            if p != Predicate::All {
                r.matched.retain(|&id| p.accepts(id));
            }
            (!r.matched.is_empty()).then_some(r)
        })
        .collect()
}
