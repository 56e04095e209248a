//! Data-driven batch scheduling of spatial cross-match queries.
//!
//! A point catalog is ordered along the hierarchical triangular mesh (HTM)
//! curve and cut into equal-count buckets. Each incoming query is split into
//! per-bucket workloads; a scheduler picks which bucket to read next by
//! blending contention (how much pending work a read would amortize) with the
//! age of the oldest waiting request. A virtual-clock simulator replays query
//! traces against that scheduler and against the round-robin and no-sharing
//! baselines.
//!
//! Module map:
//!
//! * [`htm`] – trixel ids, point location and circle covers on the sphere.
//! * [`store`] – bucket partitioning, the on-disk bucket format and the LRU
//!   bucket cache.
//! * [`workload`] – query pre-processing, per-bucket queues, completion
//!   tracking and the trace file format.
//! * [`sched`] – workload throughput, aged workload throughput, bucket
//!   selection policies and tolerance-based bias selection.
//! * [`join`] – hybrid scan/index evaluation of one bucket batch.
//! * [`sim`] – the discrete-event simulator and parameter sweeps.
//! * [`gen`] – synthetic catalogs and skewed query traces.

// Validation rejects NaN by writing checks as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gen;
pub mod htm;
pub mod join;
pub mod sched;
pub mod sim;
pub mod store;
pub mod workload;

pub use error::{Error, Result};
pub use htm::{HtmId, HtmRange, UnitVec};
pub use join::{JoinStrategy, MatchResult};
pub use sched::{CostConstants, Policy, Scheduler, TradeoffCurve, TradeoffPoint};
pub use sim::{SimConfig, SimMetrics, SimReport};
pub use store::{Bucket, BucketCache, BucketLayout, CatalogObject};
pub use workload::{MatchObject, Predicate, Query, QueryId, WorkloadItem, WorkloadManager};

/// Virtual time in integer microseconds.
pub type Micros = u64;

pub(crate) fn ms_to_micros(ms: f64) -> Micros {
    (ms * 1000.0).round().max(0.0) as Micros
}

pub(crate) fn micros_to_ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}
