//! Bucket selection.
//!
//! The data-driven policy scores every non-empty queue by blending its
//! workload throughput (objects matched per ms if the bucket were read now)
//! with the age of its oldest request, and reads the best one. `alpha = 0`
//! is purely contention driven, `alpha = 1` serves requests in arrival
//! order. Round-robin and no-sharing baselines live alongside.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::workload::{QueryId, WorkloadManager};
use crate::Micros;

/// Per-bucket read cost and per-object match cost, in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostConstants {
    pub t_b_ms: f64,
    pub t_m_ms: f64,
}

impl CostConstants {
    /// Default bucket read and per-object match costs.
    pub const REFERENCE: CostConstants = CostConstants { t_b_ms: 1200.0, t_m_ms: 0.13 };

    pub fn new(t_b_ms: f64, t_m_ms: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(t_b_ms) || !ok(t_m_ms) {
            return Err(Error::Config(format!(
                "cost constants must be positive (t_b={t_b_ms} ms, t_m={t_m_ms} ms)"
            )));
        }
        Ok(CostConstants { t_b_ms, t_m_ms })
    }
}

impl Default for CostConstants {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Objects matched per ms if a queue of `queue_len` were serviced now.
pub fn workload_throughput(queue_len: usize, resident: bool, c: &CostConstants) -> Result<f64> {
    if queue_len == 0 {
        return Err(Error::InvalidInput("workload throughput of an empty queue".into()));
    }
    let phi = if resident { 0.0 } else { 1.0 };
    let n = queue_len as f64;
    Ok(n / (c.t_b_ms * phi + c.t_m_ms * n))
}

/// Blends throughput and age. With `norm = Some((u_max, a_max))` both terms
/// are first scaled into [0, 1]; `a_max == 0` zeroes the age term.
pub fn aged_throughput(u_t: f64, age_ms: f64, alpha: f64, norm: Option<(f64, f64)>) -> Result<f64> {
    check_alpha(alpha)?;
    match norm {
        None => Ok(u_t * (1.0 - alpha) + age_ms * alpha),
        Some((u_max, a_max)) => {
            if !(u_max > 0.0) || !(a_max >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "normalizers must satisfy u_max > 0, a_max >= 0 (got {u_max}, {a_max})"
                )));
            }
            let age_term = if a_max == 0.0 { 0.0 } else { age_ms / a_max };
            Ok(u_t / u_max * (1.0 - alpha) + age_term * alpha)
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")))
    }
}

/// Highest score wins; among equal scores the first (lowest-index) entry.
pub fn argmax<I: IntoIterator<Item = (usize, f64)>>(scores: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        match best {
            Some((bi, bs)) if !(s > bs || (s == bs && i < bi)) => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Policy {
    /// Data-driven scoring with age bias `alpha`.
    DataDriven { alpha: f64, normalize: bool },
    RoundRobin,
    /// Queries one at a time in arrival order, no I/O shared between them.
    NoShare,
}

impl Policy {
    pub fn data_driven(alpha: f64, normalize: bool) -> Result<Self> {
        check_alpha(alpha).map_err(|_| Error::Config(format!("alpha {alpha} outside [0, 1]")))?;
        Ok(Policy::DataDriven { alpha, normalize })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::DataDriven { .. } => "liferaft",
            Policy::RoundRobin => "rr",
            Policy::NoShare => "noshare",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Policy::DataDriven { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Parses `liferaft`, `rr` or `noshare`; `alpha` applies to the first.
    pub fn parse(name: &str, alpha: f64, normalize: bool) -> Result<Self> {
        match name {
            "liferaft" => Policy::data_driven(alpha, normalize),
            "rr" => Ok(Policy::RoundRobin),
            "noshare" => Ok(Policy::NoShare),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected liferaft, rr or noshare)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::DataDriven { alpha, normalize } => {
                write!(f, "liferaft(alpha={alpha}{})", if *normalize { "" } else { ", raw" })
            }
            other => f.write_str(other.name()),
        }
    }
}

/// The next bucket to read, with the score that won (1.0 for the
/// baselines) and, under no-sharing, the query it is read for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub bucket: usize,
    pub score: f64,
    pub query: Option<QueryId>,
}

#[derive(Clone, Debug)]
pub struct Scheduler {
    policy: Policy,
    costs: CostConstants,
    cursor: usize,
}

impl Scheduler {
    pub fn new(policy: Policy, costs: CostConstants) -> Result<Self> {
        if let Some(a) = policy.alpha() {
            check_alpha(a)?;
        }
        Ok(Scheduler { policy, costs, cursor: 0 })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// Round-robin position: the next bucket index to consider.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn set_cursor(&mut self, cursor: usize) {
        self.cursor = cursor;
    }

    pub fn next_bucket(
        &mut self,
        mgr: &WorkloadManager,
        is_resident: &dyn Fn(usize) -> bool,
        now: Micros,
    ) -> Result<Decision> {
        if !mgr.has_work() {
            return Err(Error::NothingToSchedule);
        }
        match self.policy {
            Policy::DataDriven { alpha, normalize } => {
                let mut cands = Vec::new();
                for b in mgr.non_empty() {
                    let u = workload_throughput(mgr.queue_len(b), is_resident(b), &self.costs)?;
                    cands.push((b, u, mgr.age_ms(b, now)?));
                }
                let norm = normalize.then(|| {
                    let u_max = cands.iter().map(|c| c.1).fold(0.0, f64::max);
                    let a_max = cands.iter().map(|c| c.2).fold(0.0, f64::max);
                    (u_max, a_max)
                });
                let scored = cands
                    .iter()
                    .map(|&(b, u, a)| aged_throughput(u, a, alpha, norm).map(|s| (b, s)))
                    .collect::<Result<Vec<_>>>()?;
                let (bucket, score) = argmax(scored).ok_or(Error::NothingToSchedule)?;
                Ok(Decision { bucket, score, query: None })
            }
            Policy::RoundRobin => {
                let bucket = mgr
                    .non_empty()
                    .find(|&b| b >= self.cursor)
                    .or_else(|| mgr.non_empty().next())
                    .ok_or(Error::NothingToSchedule)?;
                self.cursor = bucket + 1;
                Ok(Decision { bucket, score: 1.0, query: None })
            }
            Policy::NoShare => {
                let t = mgr.tracker();
                let (query, bucket) = t
                    .incomplete()
                    .find_map(|q| t.lowest_queued_bucket(q).map(|b| (q, b)))
                    .ok_or(Error::NothingToSchedule)?;
                Ok(Decision { bucket, score: 1.0, query: Some(query) })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub throughput_qps: f64,
    pub mean_response_ms: f64,
}

/// Throughput and response time across bias values at one arrival rate.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffCurve {
    pub rate_qps: f64,
    pub points: Vec<TradeoffPoint>,
}

pub const CURVE_COLUMNS: &str = "alpha,throughput_qps,mean_response_ms";

impl TradeoffCurve {
    /// Sorts by alpha and rejects duplicates.
    pub fn new(rate_qps: f64, mut points: Vec<TradeoffPoint>) -> Result<Self> {
        points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if points.windows(2).any(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::InvalidInput("trade-off curve has duplicate alpha values".into()));
        }
        Ok(TradeoffCurve { rate_qps, points })
    }

    pub fn max_throughput(&self) -> f64 {
        self.points.iter().map(|p| p.throughput_qps).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "# rate_qps={}", self.rate_qps)?;
        writeln!(w, "{CURVE_COLUMNS}")?;
        for p in &self.points {
            writeln!(w, "{},{:.6},{:.3}", p.alpha, p.throughput_qps, p.mean_response_ms)?;
        }
        Ok(())
    }

    /// Reads what [`write_csv`](Self::write_csv) writes. A missing
    /// `# rate_qps=` line leaves the rate at 0.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rate = 0.0;
        let mut points = Vec::new();
        let mut saw_columns = false;
        for (no, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(format!("curve line {}: {e}", no + 1)))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("rate_qps=") {
                    rate = v.trim().parse().map_err(|_| Error::InvalidInput(format!("bad rate `{v}`")))?;
                }
                continue;
            }
            if t == CURVE_COLUMNS {
                saw_columns = true;
                continue;
            }
            let v: Vec<f64> = t
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("curve line {}: {e}", no + 1)))?;
            if v.len() != 3 {
                return Err(Error::InvalidInput(format!("curve line {}: expected 3 columns", no + 1)));
            }
            points.push(TradeoffPoint { alpha: v[0], throughput_qps: v[1], mean_response_ms: v[2] });
        }
        if !saw_columns {
            return Err(Error::InvalidInput(format!("curve is missing the `{CURVE_COLUMNS}` header")));
        }
        TradeoffCurve::new(rate, points)
    }
}

/// Lowest-response point among those within `tolerance` of the best
/// throughput; equal responses go to the larger alpha.
pub fn select_alpha(curve: &TradeoffCurve, tolerance: f64) -> Result<TradeoffPoint> {
    if curve.points.is_empty() {
        return Err(Error::InvalidInput("empty trade-off curve".into()));
    }
    if !(0.0..1.0).contains(&tolerance) {
        return Err(Error::InvalidInput(format!("tolerance {tolerance} outside [0, 1)")));
    }
    let floor = (1.0 - tolerance) * curve.max_throughput();
    curve
        .points
        .iter()
        .filter(|p| p.throughput_qps >= floor)
        .min_by(|a, b| {
            a.mean_response_ms
                .total_cmp(&b.mean_response_ms)
                .then(b.alpha.total_cmp(&a.alpha))
        })
        .copied()
        .ok_or_else(|| Error::Invariant("no feasible point on a non-empty curve".into()))
}
