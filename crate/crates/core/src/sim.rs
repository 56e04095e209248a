//! Virtual-clock replay of a query trace against one scheduling policy.
//!
//! One join executor handles one bucket batch at a time. Arrivals are
//! pre-processed and queued the instant they occur; whenever the executor
//! is idle and work is queued, the scheduler picks a bucket, its queue is
//! drained and the batch is charged by the cost model. All events sharing a
//! timestamp are applied before the next decision, arrivals first.
//!
//! Throughput is completed queries per second of makespan, where makespan
//! runs from the first arrival to the last completion.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::join::{apply_predicate, choose_strategy, evaluate_batch, JoinStrategy};
use crate::sched::{CostConstants, Policy, Scheduler, TradeoffCurve, TradeoffPoint};
use crate::store::{Bucket, BucketCache, BucketLayout, BucketSource};
use crate::workload::{format_ms, preprocess_query, Predicate, Query, QueryId, WorkloadManager};
use crate::{micros_to_ms, ms_to_micros, Micros};

/// Batch pricing. Index probes are priced so both strategies cost the same
/// for a non-resident bucket at the switch-over batch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub costs: CostConstants,
    pub t_probe_ms: f64,
}

impl CostModel {
    pub fn new(costs: CostConstants, threshold: f64, capacity: usize) -> Result<Self> {
        check_threshold(threshold)?;
        if capacity == 0 {
            return Err(Error::Config("bucket capacity must be at least 1".into()));
        }
        Ok(CostModel {
            costs,
            t_probe_ms: costs.t_b_ms / (threshold * capacity as f64),
        })
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("join threshold {threshold} outside (0, 1)")))
    }
}

/// Cost in ms of joining `batch_size` items against one bucket.
pub fn batch_cost(strategy: JoinStrategy, batch_size: usize, resident: bool, model: &CostModel) -> f64 {
    let phi = if resident { 0.0 } else { 1.0 };
    let n = batch_size as f64;
    let c = &model.costs;
    match strategy {
        JoinStrategy::Scan => c.t_b_ms * phi + c.t_m_ms * n,
        JoinStrategy::Index => model.t_probe_ms * n * phi + c.t_m_ms * n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub policy: Policy,
    pub costs: CostConstants,
    pub cache_buckets: usize,
    pub threshold: f64,
    /// Maximum queued plus in-flight items before the run fails.
    pub item_ceiling: usize,
    /// Record every scheduling decision in the report.
    pub explain: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: Policy::DataDriven { alpha: 0.0, normalize: true },
            costs: CostConstants::REFERENCE,
            cache_buckets: 20,
            threshold: 0.03,
            item_ceiling: 50_000_000,
            explain: false,
        }
    }
}

/// One scheduling decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleEntry {
    pub time_us: Micros,
    pub bucket: usize,
    pub score: f64,
    pub strategy: JoinStrategy,
    pub batch: usize,
    pub resident: bool,
    pub cost_us: Micros,
}

pub const SCHEDULE_COLUMNS: &str = "time_ms,bucket,score,strategy,batch,resident,cost_ms";

impl ScheduleEntry {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{},{},{},{}",
            format_ms(self.time_us),
            self.bucket,
            self.score,
            self.strategy.name(),
            self.batch,
            self.resident as u8,
            format_ms(self.cost_us)
        )
    }
}

pub const METRICS_COLUMNS: &str =
    "policy,alpha,rate_qps,seed,completed,makespan_ms,throughput_qps,mean_resp_ms,var_resp_ms2,cache_hit_rate";

#[derive(Clone, Debug, PartialEq)]
pub struct SimMetrics {
    pub policy: &'static str,
    pub alpha: Option<f64>,
    pub rate_qps: Option<f64>,
    pub seed: Option<u64>,
    pub completed: usize,
    pub makespan_ms: f64,
    pub throughput_qps: f64,
    pub mean_resp_ms: f64,
    /// Population variance.
    pub var_resp_ms2: f64,
    pub cache_hit_rate: f64,
    pub batches: usize,
    pub bucket_reads: usize,
    pub items_enqueued: u64,
    pub items_resolved: u64,
}

impl SimMetrics {
    /// One row matching [`METRICS_COLUMNS`]; unset labels are left blank.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{:.3},{:.6},{:.3},{:.3},{:.6}",
            self.policy,
            opt(self.alpha.map(|a| a.to_string())),
            opt(self.rate_qps.map(|r| r.to_string())),
            opt(self.seed.map(|r| r.to_string())),
            self.completed,
            self.makespan_ms,
            self.throughput_qps,
            self.mean_resp_ms,
            self.var_resp_ms2,
            self.cache_hit_rate
        )
        .expect("writing to a String");
        s
    }
}

/// Per-query outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryOutcome {
    pub query: QueryId,
    pub arrival_us: Micros,
    pub completion_us: Micros,
    /// Matched catalog objects after the predicate; 0 when joins are not
    /// evaluated.
    pub matches: u64,
}

impl QueryOutcome {
    pub fn response_ms(&self) -> f64 {
        micros_to_ms(self.completion_us - self.arrival_us)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub metrics: SimMetrics,
    /// Ordered by query id.
    pub outcomes: Vec<QueryOutcome>,
    /// Filled only when [`SimConfig::explain`] is set.
    pub log: Vec<ScheduleEntry>,
}

/// Replays `trace` charging the cost model only; no join is evaluated.
pub fn run(trace: &[Query], layout: &BucketLayout, cfg: &SimConfig) -> Result<SimReport> {
    Sim::new(trace, layout, cfg, None)?.run()
}

/// Like [`run`] but also cross-matches every batch against real bucket
/// contents and counts matches per query.
pub fn run_with_joins(trace: &[Query], source: &dyn BucketSource, cfg: &SimConfig) -> Result<SimReport> {
    Sim::new(trace, source.layout(), cfg, Some(source))?.run()
}

struct InFlight {
    finish_us: Micros,
    items: Vec<crate::workload::WorkloadItem>,
}

struct Sim<'a> {
    trace: &'a [Query],
    layout: &'a BucketLayout,
    cfg: SimConfig,
    source: Option<&'a dyn BucketSource>,
    model: CostModel,
    sched: Scheduler,
    mgr: WorkloadManager,
    cache: BucketCache,
    predicates: HashMap<QueryId, Predicate>,
    matches: HashMap<QueryId, u64>,
    log: Vec<ScheduleEntry>,
    batches: usize,
    reads: usize,
}

impl<'a> Sim<'a> {
    fn new(
        trace: &'a [Query],
        layout: &'a BucketLayout,
        cfg: &SimConfig,
        source: Option<&'a dyn BucketSource>,
    ) -> Result<Self> {
        if layout.is_empty() {
            return Err(Error::Config("bucket layout is empty".into()));
        }
        if trace.windows(2).any(|w| w[0].arrival_us > w[1].arrival_us) {
            return Err(Error::InvalidInput("trace is not sorted by arrival time".into()));
        }
        let mut predicates = HashMap::with_capacity(trace.len());
        for q in trace {
            if predicates.insert(q.id, q.predicate).is_some() {
                return Err(Error::InvalidInput(format!("duplicate query id {}", q.id)));
            }
        }
        Ok(Sim {
            trace,
            layout,
            cfg: *cfg,
            source,
            model: CostModel::new(cfg.costs, cfg.threshold, layout.capacity)?,
            sched: Scheduler::new(cfg.policy, cfg.costs)?,
            mgr: WorkloadManager::new(layout.len(), cfg.item_ceiling),
            cache: BucketCache::new(cfg.cache_buckets),
            predicates,
            matches: HashMap::new(),
            log: Vec::new(),
            batches: 0,
            reads: 0,
        })
    }

    fn run(mut self) -> Result<SimReport> {
        let mut next = 0;
        let mut busy: Option<InFlight> = None;
        let mut now: Micros = 0;
        loop {
            let t_arrival = self.trace.get(next).map(|q| q.arrival_us);
            let t_done = busy.as_ref().map(|b| b.finish_us);
            let t = match (t_arrival, t_done) {
                (Some(a), Some(d)) => a.min(d),
                (a, d) => match a.or(d) {
                    Some(t) => t,
                    None => break,
                },
            };
            debug_assert!(t >= now, "clock moved backwards");
            now = t;
            while let Some(q) = self.trace.get(next).filter(|q| q.arrival_us == now) {
                let batches = preprocess_query(q, self.layout)?;
                self.mgr.enqueue(batches, now)?;
                next += 1;
            }
            if busy.as_ref().is_some_and(|b| b.finish_us == now) {
                let done = busy.take().expect("checked above");
                self.mgr.resolve(&done.items, now)?;
            }
            if busy.is_none() && self.mgr.has_work() {
                busy = Some(self.dispatch(now)?);
            }
        }
        self.finish()
    }

    fn dispatch(&mut self, now: Micros) -> Result<InFlight> {
        let cache = &self.cache;
        let d = self.sched.next_bucket(&self.mgr, &|b| cache.is_resident(b), now)?;
        let (items, strategy, resident, bucket) = match d.query {
            Some(q) => {
                // nothing shared: neither the cache nor other queries' items
                let items = self.mgr.drain_query_bucket(d.bucket, q)?;
                let strategy = choose_strategy(items.len(), self.layout.capacity, self.cfg.threshold);
                let bucket = match self.source {
                    Some(src) => Some(src.load(d.bucket)?),
                    None => None,
                };
                (items, strategy, false, bucket)
            }
            None => {
                let items = self.mgr.drain_bucket(d.bucket)?;
                let strategy = choose_strategy(items.len(), self.layout.capacity, self.cfg.threshold);
                let (resident, bucket) = self.access(d.bucket, strategy)?;
                (items, strategy, resident, bucket)
            }
        };
        if let Some(b) = bucket {
            let results = evaluate_batch(&b, &items, strategy)?;
            let preds = &self.predicates;
            for r in apply_predicate(results, |q| preds.get(&q).copied().unwrap_or_default()) {
                *self.matches.entry(r.query).or_insert(0) += r.count() as u64;
            }
        }
        let cost_us = ms_to_micros(batch_cost(strategy, items.len(), resident, &self.model));
        self.batches += 1;
        if !resident {
            self.reads += 1;
        }
        if self.cfg.explain {
            self.log.push(ScheduleEntry {
                time_us: now,
                bucket: d.bucket,
                score: d.score,
                strategy,
                batch: items.len(),
                resident,
                cost_us,
            });
        }
        Ok(InFlight { finish_us: now + cost_us, items })
    }

    /// Cache accounting for a shared batch. Scans admit the bucket; index
    /// probes only benefit from it if already resident.
    fn access(&mut self, bucket: usize, strategy: JoinStrategy) -> Result<(bool, Option<Arc<Bucket>>)> {
        match (self.source, strategy) {
            (None, JoinStrategy::Scan) => Ok((self.cache.touch(bucket), None)),
            (None, JoinStrategy::Index) => Ok((self.cache.probe(bucket), None)),
            (Some(src), JoinStrategy::Scan) => {
                let (b, hit) = self.cache.fetch(src, bucket)?;
                Ok((hit, Some(b)))
            }
            (Some(src), JoinStrategy::Index) => {
                let hit = self.cache.probe(bucket);
                let b = match self.cache.get(bucket) {
                    Some(b) => b,
                    None => src.load(bucket)?,
                };
                Ok((hit, Some(b)))
            }
        }
    }

    fn finish(self) -> Result<SimReport> {
        if self.mgr.enqueued_total() != self.mgr.resolved_total() || self.mgr.tracker().incomplete_count() != 0 {
            return Err(Error::Invariant(format!(
                "run ended with {} of {} items unresolved",
                self.mgr.enqueued_total() - self.mgr.resolved_total(),
                self.mgr.enqueued_total()
            )));
        }
        let outcomes: Vec<QueryOutcome> = self
            .mgr
            .tracker()
            .completed()
            .into_iter()
            .map(|(query, arrival_us, completion_us)| QueryOutcome {
                query,
                arrival_us,
                completion_us,
                matches: self.matches.get(&query).copied().unwrap_or(0),
            })
            .collect();
        let completed = outcomes.len();
        let makespan_us = match (
            outcomes.iter().map(|o| o.arrival_us).min(),
            outcomes.iter().map(|o| o.completion_us).max(),
        ) {
            (Some(a), Some(c)) => c - a,
            _ => 0,
        };
        let makespan_ms = micros_to_ms(makespan_us);
        let throughput_qps = if makespan_us == 0 { 0.0 } else { completed as f64 / (makespan_ms / 1000.0) };
        let (mean, var) = mean_var(outcomes.iter().map(QueryOutcome::response_ms));
        let metrics = SimMetrics {
            policy: self.cfg.policy.name(),
            alpha: self.cfg.policy.alpha(),
            rate_qps: None,
            seed: None,
            completed,
            makespan_ms,
            throughput_qps,
            mean_resp_ms: mean,
            var_resp_ms2: var,
            cache_hit_rate: self.cache.hit_rate(),
            batches: self.batches,
            bucket_reads: self.reads,
            items_enqueued: self.mgr.enqueued_total(),
            items_resolved: self.mgr.resolved_total(),
        };
        Ok(SimReport { metrics, outcomes, log: self.log })
    }
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var)
}

/// Same queries in the same order with fresh exponential gaps at
/// `rate_qps`; the first query arrives at time 0.
pub fn retime(trace: &[Query], rate_qps: f64, seed: u64) -> Result<Vec<Query>> {
    if !(rate_qps > 0.0 && rate_qps.is_finite()) {
        return Err(Error::Config(format!("arrival rate {rate_qps} must be positive")));
    }
    let gap = Exp::new(rate_qps / 1000.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_ms = 0.0;
    Ok(trace
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if i > 0 {
                t_ms += gap.sample(&mut rng);
            }
            Query { arrival_us: ms_to_micros(t_ms), ..q.clone() }
        })
        .collect())
}

/// Grid of a bias sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// One per rate, in grid order.
    pub curves: Vec<TradeoffCurve>,
    /// Every (rate, alpha, seed) run, in grid order.
    pub cells: Vec<SimMetrics>,
}

/// Runs the data-driven policy over every (rate, alpha, seed) cell of the
/// grid, in parallel, and averages each (rate, alpha) over seeds. The
/// normalization switch and all other settings come from `base`.
pub fn sweep(trace: &[Query], layout: &BucketLayout, base: &SimConfig, spec: &SweepSpec) -> Result<SweepResult> {
    if spec.alphas.is_empty() || spec.rates.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("sweep grid has an empty axis".into()));
    }
    let normalize = match base.policy {
        Policy::DataDriven { normalize, .. } => normalize,
        _ => true,
    };
    let mut traces = Vec::new();
    for &rate in &spec.rates {
        for &seed in &spec.seeds {
            traces.push(retime(trace, rate, seed)?);
        }
    }
    let mut cells = Vec::new();
    for (ri, &rate) in spec.rates.iter().enumerate() {
        for &alpha in &spec.alphas {
            for (si, &seed) in spec.seeds.iter().enumerate() {
                cells.push((ri * spec.seeds.len() + si, rate, alpha, seed));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(ti, rate, alpha, seed)| {
            let cfg = SimConfig { policy: Policy::data_driven(alpha, normalize)?, explain: false, ..*base };
            let mut m = run(&traces[ti], layout, &cfg)?.metrics;
            m.rate_qps = Some(rate);
            m.seed = Some(seed);
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_seeds = spec.seeds.len() as f64;
    let mut curves = Vec::new();
    for (ri, &rate) in spec.rates.iter().enumerate() {
        let mut points = Vec::new();
        for (ai, &alpha) in spec.alphas.iter().enumerate() {
            let start = (ri * spec.alphas.len() + ai) * spec.seeds.len();
            let group = &rows[start..start + spec.seeds.len()];
            points.push(TradeoffPoint {
                alpha,
                throughput_qps: group.iter().map(|m| m.throughput_qps).sum::<f64>() / n_seeds,
                mean_response_ms: group.iter().map(|m| m.mean_resp_ms).sum::<f64>() / n_seeds,
            });
        }
        curves.push(TradeoffCurve::new(rate, points)?);
    }
    Ok(SweepResult { curves, cells: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::htm::{HtmId, HtmRange, UnitVec};
    use crate::store::{partition_catalog, CatalogObject, InMemoryBuckets};
    use crate::workload::MatchObject;

    fn layout_1() -> BucketLayout {
        BucketLayout {
            capacity: 1_000,
            ranges: vec![HtmRange::new(HtmId::first_at(14), HtmId::last_at(14)).unwrap()],
            counts: vec![1_000],
        }
    }

    fn query(id: QueryId, arrival_ms: f64, n: usize) -> Query {
        let o = MatchObject::new(UnitVec::from_radec(0.3, 0.2), 1e-5).unwrap();
        Query::new(id, arrival_ms, vec![o; n], Predicate::All).unwrap()
    }

    fn cfg(policy: Policy) -> SimConfig {
        SimConfig { policy, ..SimConfig::default() }
    }

    #[test]
    fn cost_hand_values() {
        let m = CostModel::new(CostConstants::REFERENCE, 0.03, 1_000).unwrap();
        assert!((batch_cost(JoinStrategy::Scan, 100, false, &m) - 1213.0).abs() < 1e-9);
        assert!((batch_cost(JoinStrategy::Scan, 100, true, &m) - 13.0).abs() < 1e-9);
        let scan = batch_cost(JoinStrategy::Scan, 30, false, &m);
        let index = batch_cost(JoinStrategy::Index, 30, false, &m);
        assert!((scan - index).abs() < 1e-9);
        assert!((batch_cost(JoinStrategy::Index, 5, true, &m) - 0.65).abs() < 1e-12);
        assert!(CostModel::new(CostConstants::REFERENCE, 1.0, 10).is_err());
    }

    #[test]
    fn single_query_single_read() {
        for alpha in [0.0, 0.4, 1.0] {
            let r = run(&[query(0, 500.0, 100)], &layout_1(), &cfg(Policy::DataDriven { alpha, normalize: true })).unwrap();
            assert_eq!(r.outcomes[0].completion_us, 500_000 + 1_213_000);
            assert_eq!(r.metrics.makespan_ms, 1213.0);
            assert!((r.metrics.throughput_qps - 1.0 / 1.213).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_read_versus_no_sharing() {
        let trace = [query(0, 0.0, 100), query(1, 0.0, 100)];
        let shared = run(&trace, &layout_1(), &cfg(Policy::DataDriven { alpha: 0.0, normalize: true })).unwrap();
        assert_eq!(shared.metrics.batches, 1);
        assert!(shared.outcomes.iter().all(|o| o.completion_us == 1_226_000));
        let alone = run(&trace, &layout_1(), &cfg(Policy::NoShare)).unwrap();
        assert_eq!(alone.outcomes[0].completion_us, 1_213_000);
        assert_eq!(alone.outcomes[1].completion_us, 2_426_000);
        assert_eq!(alone.metrics.cache_hit_rate, 0.0);
    }

    #[test]
    fn empty_trace() {
        let r = run(&[], &layout_1(), &SimConfig::default()).unwrap();
        assert_eq!(r.metrics.completed, 0);
        assert_eq!(r.metrics.makespan_ms, 0.0);
        assert_eq!(r.metrics.throughput_qps, 0.0);
    }

    #[test]
    fn unsorted_trace_rejected() {
        let trace = [query(0, 10.0, 1), query(1, 5.0, 1)];
        assert!(run(&trace, &layout_1(), &SimConfig::default()).is_err());
    }

    #[test]
    fn saturation_reports_time() {
        let trace = [query(0, 0.0, 60), query(1, 2.5, 60)];
        let c = SimConfig { item_ceiling: 100, ..SimConfig::default() };
        match run(&trace, &layout_1(), &c) {
            Err(Error::Saturated { at_ms, .. }) => assert_eq!(at_ms, 2.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arrival_during_batch_waits_for_next_decision() {
        let trace = [query(0, 0.0, 100), query(1, 100.0, 100)];
        let r = run(&trace, &layout_1(), &SimConfig { explain: true, ..SimConfig::default() }).unwrap();
        // second batch starts when the first ends, now against a resident bucket
        assert_eq!(r.log.len(), 2);
        assert_eq!(r.log[1].time_us, 1_213_000);
        assert!(r.log[1].resident);
        assert_eq!(r.outcomes[1].completion_us, 1_213_000 + 13_000);
    }

    #[test]
    fn joins_count_matches() {
        let objs: Vec<_> = (0..200u64)
            .map(|i| CatalogObject::new(i, UnitVec::from_radec(0.001 * i as f64, 0.1)).unwrap())
            .collect();
        let src = InMemoryBuckets::new(partition_catalog(objs.clone(), 50).unwrap(), 50);
        let probe = MatchObject::new(objs[17].pos, 1e-7).unwrap();
        let trace = vec![Query::new(0, 0.0, vec![probe], Predicate::All).unwrap()];
        let r = run_with_joins(&trace, &src, &SimConfig::default()).unwrap();
        assert_eq!(r.outcomes[0].matches, 1);
        let plain = run(&trace, src.layout(), &SimConfig::default()).unwrap();
        assert_eq!(plain.metrics, r.metrics);
    }

    #[test]
    fn retime_keeps_contents() {
        let trace: Vec<_> = (0..500).map(|i| query(i, i as f64, 1)).collect();
        let a = retime(&trace, 2.0, 7).unwrap();
        assert_eq!(a, retime(&trace, 2.0, 7).unwrap());
        assert_eq!(a[0].arrival_us, 0);
        assert!(a.windows(2).all(|w| w[0].arrival_us <= w[1].arrival_us));
        assert!(a.iter().zip(&trace).all(|(x, y)| x.id == y.id && x.objects == y.objects));
        let span_s = a.last().unwrap().arrival_us as f64 / 1e6;
        assert!((499.0 / span_s - 2.0).abs() < 0.3);
    }

    #[test]
    fn sweep_grid_shapes() {
        let trace: Vec<_> = (0..20).map(|i| query(i, 0.0, 10)).collect();
        let spec = SweepSpec { alphas: vec![0.0, 1.0], rates: vec![0.5, 2.0], seeds: vec![1, 2] };
        let r = sweep(&trace, &layout_1(), &SimConfig::default(), &spec).unwrap();
        assert_eq!(r.curves.len(), 2);
        assert_eq!(r.cells.len(), 8);
        assert_eq!(r, sweep(&trace, &layout_1(), &SimConfig::default(), &spec).unwrap());
        let one = SweepSpec { alphas: vec![0.5], rates: vec![1.0], seeds: vec![3] };
        let r1 = sweep(&trace, &layout_1(), &SimConfig::default(), &one).unwrap();
        let direct = run(
            &retime(&trace, 1.0, 3).unwrap(),
            &layout_1(),
            &cfg(Policy::DataDriven { alpha: 0.5, normalize: true }),
        )
        .unwrap();
        assert_eq!(r1.curves[0].points[0].throughput_qps, direct.metrics.throughput_qps);
    }
}
