//! Query pre-processing and the workload manager.
//!
//! A query arrives as a list of probe objects, each with a search radius.
//! Pre-processing turns every probe into one [`WorkloadItem`] per bucket its
//! id range overlaps. The manager keeps one FIFO queue per bucket, the age
//! of each queue's oldest request, and how many items every query still
//! waits on.

mod trace;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

pub use trace::{format_ms, read_trace, write_trace, Trace};

use crate::error::{Error, Result};
use crate::htm::{cover_envelope, HtmRange, UnitVec, MAX_LEVEL};
use crate::store::{magnitude_of, BucketLayout};
use crate::{micros_to_ms, ms_to_micros, Micros};

pub type QueryId = u32;

/// A probe position with its search radius and the level-14 id range that
/// bounds every potential match.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchObject {
    pub pos: UnitVec,
    pub radius: f64,
    pub range: HtmRange,
}

impl MatchObject {
    pub fn new(pos: UnitVec, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!("match radius {radius} must be in (0, pi]")));
        }
        let range = cover_envelope(&pos, radius, MAX_LEVEL)?;
        Ok(MatchObject { pos, radius, range })
    }
}

/// Per-query filter applied to join output.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Predicate {
    #[default]
    All,
    /// Keeps catalog objects whose magnitude lies in `[lo, hi)`.
    MagnitudeBand { lo: f64, hi: f64 },
}

impl Predicate {
    pub fn accepts(&self, object_id: u64) -> bool {
        match *self {
            Predicate::All => true,
            Predicate::MagnitudeBand { lo, hi } => {
                let m = magnitude_of(object_id);
                lo <= m && m < hi
            }
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    /// `all` or `mag:<lo>:<hi>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(Predicate::All);
        }
        if let Some(rest) = s.strip_prefix("mag:") {
            let mut parts = rest.split(':');
            let lo = parts.next().and_then(|v| v.parse::<f64>().ok());
            let hi = parts.next().and_then(|v| v.parse::<f64>().ok());
            if let (Some(lo), Some(hi), None) = (lo, hi, parts.next()) {
                if lo.is_finite() && hi.is_finite() {
                    return Ok(Predicate::MagnitudeBand { lo, hi });
                }
            }
        }
        Err(Error::Config(format!("unknown predicate `{s}` (expected `all` or `mag:<lo>:<hi>`)")))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::All => f.write_str("all"),
            Predicate::MagnitudeBand { lo, hi } => write!(f, "mag:{lo}:{hi}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub id: QueryId,
    pub arrival_us: Micros,
    pub objects: Vec<MatchObject>,
    pub predicate: Predicate,
}

impl Query {
    pub fn new(id: QueryId, arrival_ms: f64, objects: Vec<MatchObject>, predicate: Predicate) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::InvalidInput(format!("query {id} has no objects")));
        }
        if !(arrival_ms >= 0.0 && arrival_ms.is_finite()) {
            return Err(Error::InvalidInput(format!("query {id} arrival {arrival_ms} ms is negative")));
        }
        Ok(Query {
            id,
            arrival_us: ms_to_micros(arrival_ms),
            objects,
            predicate,
        })
    }

    pub fn arrival_ms(&self) -> f64 {
        micros_to_ms(self.arrival_us)
    }
}

/// One probe of one query, pending against one bucket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadItem {
    pub query: QueryId,
    /// Position of the probe within its query's object list.
    pub probe: u32,
    pub object: MatchObject,
    pub enqueue_us: Micros,
}

/// Splits `q` into per-bucket item lists, ascending by bucket index.
///
/// Every probe yields one item per bucket its range overlaps; items carry
/// the query's arrival time as their enqueue time.
pub fn preprocess_query(q: &Query, layout: &BucketLayout) -> Result<Vec<(usize, Vec<WorkloadItem>)>> {
    let mut per_bucket: BTreeMap<usize, Vec<WorkloadItem>> = BTreeMap::new();
    for (probe, object) in q.objects.iter().enumerate() {
        let hit = layout.overlapping(&object.range);
        if hit.is_empty() {
            return Err(Error::Invariant(format!(
                "query {} probe {probe} range [{}, {}] overlaps no bucket",
                q.id, object.range.lo, object.range.hi
            )));
        }
        for b in hit {
            per_bucket.entry(b).or_default().push(WorkloadItem {
                query: q.id,
                probe: probe as u32,
                object: *object,
                enqueue_us: q.arrival_us,
            });
        }
    }
    Ok(per_bucket.into_iter().collect())
}

#[derive(Clone, Debug, Default)]
pub struct WorkloadQueue {
    items: Vec<WorkloadItem>,
    oldest_us: Option<Micros>,
}

impl WorkloadQueue {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[WorkloadItem] {
        &self.items
    }

    /// Enqueue time of the oldest item; `None` for an empty queue.
    pub fn oldest_enqueue(&self) -> Option<Micros> {
        self.oldest_us
    }

    fn recompute_oldest(&mut self) {
        self.oldest_us = self.items.iter().map(|i| i.enqueue_us).min();
    }
}

#[derive(Clone, Debug)]
struct QueryState {
    arrival_us: Micros,
    pending: usize,
    total: usize,
    queued_by_bucket: BTreeMap<usize, usize>,
    completion_us: Option<Micros>,
}

/// Per-query bookkeeping: outstanding item counts and completion times.
#[derive(Clone, Debug, Default)]
pub struct QueryTracker {
    states: HashMap<QueryId, QueryState>,
    incomplete: BTreeSet<(Micros, QueryId)>,
}

impl QueryTracker {
    pub fn pending(&self, q: QueryId) -> Option<usize> {
        self.states.get(&q).map(|s| s.pending)
    }

    pub fn total_items(&self, q: QueryId) -> Option<usize> {
        self.states.get(&q).map(|s| s.total)
    }

    pub fn arrival(&self, q: QueryId) -> Option<Micros> {
        self.states.get(&q).map(|s| s.arrival_us)
    }

    pub fn completion(&self, q: QueryId) -> Option<Micros> {
        self.states.get(&q).and_then(|s| s.completion_us)
    }

    pub fn is_complete(&self, q: QueryId) -> bool {
        self.completion(q).is_some()
    }

    pub fn incomplete_count(&self) -> usize {
        self.incomplete.len()
    }

    pub fn known_queries(&self) -> usize {
        self.states.len()
    }

    /// Earliest-arrived query that still has pending items (ties by id).
    pub fn oldest_incomplete(&self) -> Option<QueryId> {
        self.incomplete.first().map(|&(_, q)| q)
    }

    /// Incomplete queries in arrival order.
    pub fn incomplete(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.incomplete.iter().map(|&(_, q)| q)
    }

    /// Lowest bucket index where `q` still has queued (not in-flight) items.
    pub fn lowest_queued_bucket(&self, q: QueryId) -> Option<usize> {
        self.states
            .get(&q)
            .and_then(|s| s.queued_by_bucket.keys().next().copied())
    }

    /// `(query, arrival, completion)` for every finished query, by id.
    pub fn completed(&self) -> Vec<(QueryId, Micros, Micros)> {
        let mut v: Vec<_> = self
            .states
            .iter()
            .filter_map(|(&q, s)| s.completion_us.map(|c| (q, s.arrival_us, c)))
            .collect();
        v.sort_unstable_by_key(|&(q, ..)| q);
        v
    }

    fn pending_sum(&self) -> usize {
        self.incomplete
            .iter()
            .map(|(_, q)| self.states[q].pending)
            .sum()
    }
}

/// Per-bucket workload queues plus the query tracker.
#[derive(Clone, Debug)]
pub struct WorkloadManager {
    queues: Vec<WorkloadQueue>,
    non_empty: BTreeSet<usize>,
    tracker: QueryTracker,
    ceiling: usize,
    queued: usize,
    in_flight: usize,
    enqueued_total: u64,
    resolved_total: u64,
}

impl WorkloadManager {
    /// `ceiling` bounds queued plus in-flight items; exceeding it is a
    /// saturation error rather than a spill to disk.
    pub fn new(n_buckets: usize, ceiling: usize) -> Self {
        WorkloadManager {
            queues: vec![WorkloadQueue::default(); n_buckets],
            non_empty: BTreeSet::new(),
            tracker: QueryTracker::default(),
            ceiling,
            queued: 0,
            in_flight: 0,
            enqueued_total: 0,
            resolved_total: 0,
        }
    }

    pub fn n_buckets(&self) -> usize {
        self.queues.len()
    }

    pub fn tracker(&self) -> &QueryTracker {
        &self.tracker
    }

    pub fn queue(&self, bucket: usize) -> &WorkloadQueue {
        &self.queues[bucket]
    }

    pub fn queue_len(&self, bucket: usize) -> usize {
        self.queues.get(bucket).map_or(0, WorkloadQueue::len)
    }

    /// Buckets with at least one queued item, ascending.
    pub fn non_empty(&self) -> impl Iterator<Item = usize> + '_ {
        self.non_empty.iter().copied()
    }

    pub fn has_work(&self) -> bool {
        !self.non_empty.is_empty()
    }

    pub fn queued_items(&self) -> usize {
        self.queued
    }

    pub fn in_flight_items(&self) -> usize {
        self.in_flight
    }

    pub fn enqueued_total(&self) -> u64 {
        self.enqueued_total
    }

    pub fn resolved_total(&self) -> u64 {
        self.resolved_total
    }

    /// Appends pre-processed items to their bucket queues and registers
    /// their queries. `now` only labels a saturation error.
    pub fn enqueue(&mut self, batches: Vec<(usize, Vec<WorkloadItem>)>, now: Micros) -> Result<()> {
        let incoming: usize = batches.iter().map(|(_, v)| v.len()).sum();
        if self.queued + self.in_flight + incoming > self.ceiling {
            return Err(Error::Saturated {
                at_ms: micros_to_ms(now),
                queued: self.queued + self.in_flight,
                incoming,
                ceiling: self.ceiling,
            });
        }
        for (bucket, _) in &batches {
            if *bucket >= self.queues.len() {
                return Err(Error::InvalidInput(format!(
                    "bucket {bucket} out of range (have {})",
                    self.queues.len()
                )));
            }
        }
        for (_, items) in &batches {
            for it in items {
                if self.tracker.is_complete(it.query) {
                    return Err(Error::InvalidInput(format!(
                        "query {} already completed; ids must be unique",
                        it.query
                    )));
                }
            }
        }
        for (bucket, items) in batches {
            for it in &items {
                let state = self.tracker.states.entry(it.query).or_insert_with(|| QueryState {
                    arrival_us: it.enqueue_us,
                    pending: 0,
                    total: 0,
                    queued_by_bucket: BTreeMap::new(),
                    completion_us: None,
                });
                if state.pending == 0 {
                    self.tracker.incomplete.insert((state.arrival_us, it.query));
                }
                state.pending += 1;
                state.total += 1;
                *state.queued_by_bucket.entry(bucket).or_insert(0) += 1;
            }
            let n = items.len();
            if n == 0 {
                continue;
            }
            let q = &mut self.queues[bucket];
            let min_new = items.iter().map(|i| i.enqueue_us).min();
            q.oldest_us = match (q.oldest_us, min_new) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            q.items.extend(items);
            self.non_empty.insert(bucket);
            self.queued += n;
            self.enqueued_total += n as u64;
        }
        Ok(())
    }

    fn forget_queued(&mut self, bucket: usize, items: &[WorkloadItem]) {
        for it in items {
            if let Some(s) = self.tracker.states.get_mut(&it.query) {
                if let Some(c) = s.queued_by_bucket.get_mut(&bucket) {
                    *c -= 1;
                    if *c == 0 {
                        s.queued_by_bucket.remove(&bucket);
                    }
                }
            }
        }
        self.queued -= items.len();
        self.in_flight += items.len();
    }

    /// Removes and returns every item queued for `bucket`. The items stay
    /// pending for their queries until [`resolve`](Self::resolve).
    pub fn drain_bucket(&mut self, bucket: usize) -> Result<Vec<WorkloadItem>> {
        let q = self.queues.get_mut(bucket).ok_or(Error::EmptyQueue(bucket))?;
        if q.items.is_empty() {
            return Err(Error::EmptyQueue(bucket));
        }
        let items = std::mem::take(&mut q.items);
        q.oldest_us = None;
        self.non_empty.remove(&bucket);
        self.forget_queued(bucket, &items);
        Ok(items)
    }

    /// Removes only `query`'s items from `bucket` (used when I/O is not
    /// shared between queries).
    pub fn drain_query_bucket(&mut self, bucket: usize, query: QueryId) -> Result<Vec<WorkloadItem>> {
        let q = self.queues.get_mut(bucket).ok_or(Error::EmptyQueue(bucket))?;
        let (taken, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut q.items)
            .into_iter()
            .partition(|i| i.query == query);
        q.items = kept;
        if taken.is_empty() {
            q.recompute_oldest();
            return Err(Error::EmptyQueue(bucket));
        }
        q.recompute_oldest();
        if q.items.is_empty() {
            self.non_empty.remove(&bucket);
        }
        self.forget_queued(bucket, &taken);
        Ok(taken)
    }

    /// Marks drained items as matched at `now`; returns queries that
    /// completed as a result.
    pub fn resolve(&mut self, items: &[WorkloadItem], now: Micros) -> Result<Vec<QueryId>> {
        if items.len() > self.in_flight {
            return Err(Error::Invariant("resolving more items than are in flight".into()));
        }
        let mut done = Vec::new();
        for it in items {
            let s = self
                .tracker
                .states
                .get_mut(&it.query)
                .ok_or_else(|| Error::Invariant(format!("resolving item of unknown query {}", it.query)))?;
            if s.pending == 0 {
                return Err(Error::Invariant(format!("query {} resolved twice", it.query)));
            }
            s.pending -= 1;
            if s.pending == 0 {
                s.completion_us = Some(now);
                self.tracker.incomplete.remove(&(s.arrival_us, it.query));
                done.push(it.query);
            }
        }
        self.in_flight -= items.len();
        self.resolved_total += items.len() as u64;
        Ok(done)
    }

    /// Age of the oldest request queued for `bucket`, in milliseconds.
    pub fn age_ms(&self, bucket: usize, now: Micros) -> Result<f64> {
        let oldest = self
            .queues
            .get(bucket)
            .and_then(WorkloadQueue::oldest_enqueue)
            .ok_or(Error::EmptyQueue(bucket))?;
        Ok(micros_to_ms(now.saturating_sub(oldest)))
    }

    /// Queued plus in-flight items equal the pending items of all
    /// incomplete queries.
    pub fn is_conserved(&self) -> bool {
        let queued: usize = self.queues.iter().map(WorkloadQueue::len).sum();
        queued == self.queued && self.queued + self.in_flight == self.tracker.pending_sum()
    }
}
