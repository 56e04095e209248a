//! Synthetic catalogs and skewed cross-match traces.
//!
//! Catalog objects are uniform on the sphere. Query centers come from a
//! Zipf-weighted set of hotspots, with optional reuse of the previous
//! query's hotspot; probes scatter tightly around the center, except for a
//! small fraction placed anywhere on the sky. The Zipf exponent is found by
//! bisection so the busiest 2% of buckets receive the requested share of
//! all work items.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::htm::{point_to_htm, UnitVec, MAX_LEVEL};
use crate::store::{BucketLayout, CatalogObject};
use crate::workload::{preprocess_query, MatchObject, Predicate, Query};
use crate::ms_to_micros;

const ARCSEC: f64 = std::f64::consts::PI / (180.0 * 3600.0);

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_catalog: usize,
    /// Objects per bucket.
    pub capacity: usize,
    pub n_queries: usize,
    pub objects_min: usize,
    pub objects_max: usize,
    /// Shape of the bounded Pareto law for objects per query.
    pub objects_shape: f64,
    pub hotspots: usize,
    /// Fixed exponent; `None` tunes it against `target_top2_mass`.
    pub zipf_exponent: Option<f64>,
    pub rate_qps: f64,
    pub radius_min_arcsec: f64,
    pub radius_max_arcsec: f64,
    /// Probability that a query reuses the previous query's hotspot.
    pub rho: f64,
    /// Angular jitter of a query center around its hotspot (radians).
    pub hotspot_spread_rad: f64,
    /// Angular scatter of probes around their query center (radians).
    pub probe_spread_rad: f64,
    /// Fraction of probes placed uniformly on the sphere.
    pub outlier_frac: f64,
    pub target_top2_mass: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            n_catalog: 256_000,
            capacity: 1_000,
            n_queries: 2_000,
            objects_min: 20,
            objects_max: 500,
            objects_shape: 1.0,
            hotspots: 256,
            zipf_exponent: None,
            rate_qps: 2.0,
            radius_min_arcsec: 1.0,
            radius_max_arcsec: 30.0,
            rho: 0.5,
            hotspot_spread_rad: 0.05,
            probe_spread_rad: 0.012,
            outlier_frac: 0.01,
            target_top2_mass: 0.5,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_catalog == 0 {
            return bad("catalog must have at least one object".into());
        }
        if self.capacity == 0 || self.n_queries == 0 || self.hotspots == 0 {
            return bad("capacity, query count and hotspot count must be at least 1".into());
        }
        if self.objects_min == 0 || self.objects_min > self.objects_max {
            return bad(format!(
                "objects per query must satisfy 1 <= min <= max (got {}..{})",
                self.objects_min, self.objects_max
            ));
        }
        if !(self.objects_shape > 0.0) {
            return bad(format!("objects shape {} must be positive", self.objects_shape));
        }
        if !(self.rate_qps > 0.0 && self.rate_qps.is_finite()) {
            return bad(format!("arrival rate {} must be positive", self.rate_qps));
        }
        if !(self.radius_min_arcsec > 0.0 && self.radius_min_arcsec <= self.radius_max_arcsec) {
            return bad("radius bounds must satisfy 0 < min <= max".into());
        }
        for (name, v) in [("rho", self.rho), ("outlier fraction", self.outlier_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(self.target_top2_mass > 0.0 && self.target_top2_mass < 1.0) {
            return bad(format!("skew target {} outside (0, 1)", self.target_top2_mass));
        }
        if self.hotspot_spread_rad < 0.0 || self.probe_spread_rad < 0.0 {
            return bad("spreads must be non-negative".into());
        }
        if let Some(s) = self.zipf_exponent {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("zipf exponent {s} must be non-negative"));
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform_point(rng: &mut impl Rng) -> UnitVec {
    loop {
        let (x, y, z): (f64, f64, f64) = (
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if let Ok(p) = UnitVec::normalize(x, y, z) {
            return p;
        }
    }
}

fn scatter(c: &UnitVec, sigma: f64, rng: &mut impl Rng) -> UnitVec {
    let g = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
    let (dx, dy, dz) = (g(rng), g(rng), g(rng));
    UnitVec::normalize(c.x + sigma * dx, c.y + sigma * dy, c.z + sigma * dz).unwrap_or(*c)
}

/// `n_catalog` objects uniform on the sphere with ids `0..n`.
pub fn generate_catalog(cfg: &GenConfig) -> Result<Vec<CatalogObject>> {
    if cfg.n_catalog == 0 {
        return Err(Error::Config("catalog must have at least one object".into()));
    }
    let mut rng = stream(cfg.seed, 1);
    (0..cfg.n_catalog as u64)
        .map(|id| CatalogObject::new(id, uniform_point(&mut rng)))
        .collect()
}

/// Realized skew of a trace, tallied from pre-processed work items.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewStats {
    /// Share of all items landing in the busiest 2% of buckets.
    pub top2pct_mass: f64,
    /// Share of queries touching at least one of the 10 buckets touched by
    /// the most queries.
    pub top10_query_coverage: f64,
    pub total_items: u64,
    pub bucket_items: Vec<u64>,
    pub bucket_queries: Vec<u32>,
}

/// Number of buckets making up the top 2%.
pub fn top2pct_count(n_buckets: usize) -> usize {
    ((n_buckets as f64 * 0.02).round() as usize).clamp(1, n_buckets.max(1))
}

fn top_share(values: &[f64], k: usize) -> f64 {
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter().take(k).sum::<f64>() / total
}

pub fn measure_skew(queries: &[Query], layout: &BucketLayout) -> Result<SkewStats> {
    let nb = layout.len();
    let mut items = vec![0u64; nb];
    let mut touched = vec![0u32; nb];
    let mut per_query = Vec::with_capacity(queries.len());
    for q in queries {
        let parts = preprocess_query(q, layout)?;
        for (b, v) in &parts {
            items[*b] += v.len() as u64;
            touched[*b] += 1;
        }
        per_query.push(parts.into_iter().map(|(b, _)| b).collect::<Vec<_>>());
    }
    let mut rank: Vec<usize> = (0..nb).collect();
    rank.sort_by(|&a, &b| touched[b].cmp(&touched[a]).then(a.cmp(&b)));
    let mut top = vec![false; nb];
    for &b in rank.iter().take(10) {
        top[b] = true;
    }
    let covered = per_query.iter().filter(|bs| bs.iter().any(|&b| top[b])).count();
    let as_f: Vec<f64> = items.iter().map(|&x| x as f64).collect();
    Ok(SkewStats {
        top2pct_mass: top_share(&as_f, top2pct_count(nb)),
        top10_query_coverage: if queries.is_empty() { 0.0 } else { covered as f64 / queries.len() as f64 },
        total_items: items.iter().sum(),
        bucket_items: items,
        bucket_queries: touched,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenReport {
    pub zipf_exponent: f64,
    pub tuned: bool,
    /// Top-2% share predicted while tuning.
    pub expected_top2_mass: f64,
    pub skew: SkewStats,
    pub realized_rate_qps: f64,
    pub n_queries: usize,
    pub warnings: Vec<String>,
}

impl GenReport {
    pub fn write<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "queries={}", self.n_queries)?;
        writeln!(w, "work_items={}", self.skew.total_items)?;
        writeln!(w, "zipf_exponent={:.6}", self.zipf_exponent)?;
        writeln!(w, "zipf_tuned={}", self.tuned)?;
        writeln!(w, "expected_top2pct_mass={:.4}", self.expected_top2_mass)?;
        writeln!(w, "top2pct_mass={:.4}", self.skew.top2pct_mass)?;
        writeln!(w, "top10_query_coverage={:.4}", self.skew.top10_query_coverage)?;
        writeln!(w, "realized_rate_qps={:.6}", self.realized_rate_qps)?;
        for warning in &self.warnings {
            writeln!(w, "warning={warning}")?;
        }
        Ok(())
    }
}

/// Acceptance bands for the realized skew.
pub const MASS_BAND: (f64, f64) = (0.45, 0.55);
pub const COVERAGE_BAND: (f64, f64) = (0.55, 0.67);

fn zipf_weights(h: usize, s: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=h).map(|k| (k as f64).powf(-s)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn zipf_pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Per-hotspot distribution of probe positions over buckets, by sampling.
fn hotspot_footprints(cfg: &GenConfig, centers: &[UnitVec], layout: &BucketLayout) -> Result<Vec<Vec<f64>>> {
    const SAMPLES: usize = 400;
    let mut rng = stream(cfg.seed, 4);
    centers
        .iter()
        .map(|c| {
            let mut hist = vec![0.0; layout.len()];
            for _ in 0..SAMPLES {
                let qc = scatter(c, cfg.hotspot_spread_rad, &mut rng);
                let p = scatter(&qc, cfg.probe_spread_rad, &mut rng);
                let b = layout
                    .locate(point_to_htm(&p, MAX_LEVEL)?)
                    .ok_or_else(|| Error::Invariant("layout does not tile the sphere".into()))?;
                hist[b] += 1.0 / SAMPLES as f64;
            }
            Ok(hist)
        })
        .collect()
}

fn expected_top2(cfg: &GenConfig, footprints: &[Vec<f64>], s: f64) -> f64 {
    let nb = footprints[0].len();
    let w = zipf_weights(footprints.len(), s);
    let mut mass = vec![cfg.outlier_frac / nb as f64; nb];
    for (wh, fp) in w.iter().zip(footprints) {
        for (m, f) in mass.iter_mut().zip(fp) {
            *m += (1.0 - cfg.outlier_frac) * wh * f;
        }
    }
    top_share(&mass, top2pct_count(nb))
}

/// Bisection on the exponent; returns `(exponent, predicted share, hit)`.
fn tune_exponent(cfg: &GenConfig, footprints: &[Vec<f64>]) -> (f64, f64, bool) {
    let (mut lo, mut hi) = (0.0, 8.0);
    let target = cfg.target_top2_mass;
    let f_lo = expected_top2(cfg, footprints, lo);
    let f_hi = expected_top2(cfg, footprints, hi);
    if f_lo >= target {
        return (lo, f_lo, false);
    }
    if f_hi <= target {
        return (hi, f_hi, false);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_top2(cfg, footprints, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    (s, expected_top2(cfg, footprints, s), true)
}

/// Generates the query trace for buckets built from the same catalog.
pub fn generate_trace(cfg: &GenConfig, layout: &BucketLayout) -> Result<(Vec<Query>, GenReport)> {
    cfg.validate()?;
    if layout.is_empty() {
        return Err(Error::Config("bucket layout is empty".into()));
    }
    let mut warnings = Vec::new();
    let mut crng = stream(cfg.seed, 2);
    let centers: Vec<UnitVec> = (0..cfg.hotspots).map(|_| uniform_point(&mut crng)).collect();
    let footprints = hotspot_footprints(cfg, &centers, layout)?;

    let (s, expected, tuned) = match cfg.zipf_exponent {
        Some(s) => (s, expected_top2(cfg, &footprints, s), false),
        None => {
            let (s, e, hit) = tune_exponent(cfg, &footprints);
            if !hit {
                warnings.push(format!(
                    "top-2% mass target {} unreachable by exponent alone; using {s} (predicted {e:.3})",
                    cfg.target_top2_mass
                ));
            }
            (s, e, true)
        }
    };
    let mut cdf = zipf_weights(cfg.hotspots, s);
    for i in 1..cdf.len() {
        cdf[i] += cdf[i - 1];
    }

    let mut rng = stream(cfg.seed, 3);
    let gap = Exp::new(cfg.rate_qps / 1000.0).map_err(|e| Error::Config(e.to_string()))?;
    let (lo, hi, a) = (cfg.objects_min as f64, cfg.objects_max as f64, cfg.objects_shape);
    let (r_lo, r_hi) = (cfg.radius_min_arcsec.ln(), cfg.radius_max_arcsec.ln());
    let mut t_ms = 0.0;
    let mut prev: Option<usize> = None;
    let mut queries = Vec::with_capacity(cfg.n_queries);
    for id in 0..cfg.n_queries {
        if id > 0 {
            t_ms += gap.sample(&mut rng);
        }
        let u: f64 = rng.random();
        let reuse = rng.random_bool(cfg.rho);
        let h = match prev {
            Some(p) if reuse => p,
            _ => zipf_pick(&cdf, u),
        };
        prev = Some(h);
        let center = scatter(&centers[h], cfg.hotspot_spread_rad, &mut rng);
        // bounded Pareto by inversion
        let v: f64 = rng.random();
        let n = lo / (1.0 - v * (1.0 - (lo / hi).powf(a))).powf(1.0 / a);
        let n = (n.round() as usize).clamp(cfg.objects_min, cfg.objects_max);
        let mut objects = Vec::with_capacity(n);
        for _ in 0..n {
            let pos = if rng.random_bool(cfg.outlier_frac) {
                uniform_point(&mut rng)
            } else {
                scatter(&center, cfg.probe_spread_rad, &mut rng)
            };
            let radius = rng.random_range(r_lo..=r_hi).exp() * ARCSEC;
            objects.push(MatchObject::new(pos, radius)?);
        }
        let mut q = Query::new(id as u32, 0.0, objects, Predicate::All)?;
        q.arrival_us = ms_to_micros(t_ms);
        queries.push(q);
    }

    let skew = measure_skew(&queries, layout)?;
    if !(MASS_BAND.0..=MASS_BAND.1).contains(&skew.top2pct_mass) {
        warnings.push(format!(
            "realized top-2% mass {:.3} outside [{}, {}]",
            skew.top2pct_mass, MASS_BAND.0, MASS_BAND.1
        ));
    }
    if !(COVERAGE_BAND.0..=COVERAGE_BAND.1).contains(&skew.top10_query_coverage) {
        warnings.push(format!(
            "realized top-10 query coverage {:.3} outside [{}, {}]",
            skew.top10_query_coverage, COVERAGE_BAND.0, COVERAGE_BAND.1
        ));
    }
    let span_s = queries.last().map_or(0, |q| q.arrival_us) as f64 / 1e6;
    let realized_rate_qps = if span_s > 0.0 { (queries.len() - 1) as f64 / span_s } else { 0.0 };
    let report = GenReport {
        zipf_exponent: s,
        tuned,
        expected_top2_mass: expected,
        skew,
        realized_rate_qps,
        n_queries: queries.len(),
        warnings,
    };
    Ok((queries, report))
}
