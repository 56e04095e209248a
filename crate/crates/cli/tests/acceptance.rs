//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines come out in order; exits non-zero on any FAIL.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use skybatch::gen::{generate_catalog, generate_trace, GenConfig};
use skybatch::htm::{angular_distance, cover_circle, trixel_corners};
use skybatch::join::{index_join, sweep_join, BucketIndex};
use skybatch::sched::{aged_throughput, select_alpha, workload_throughput};
use skybatch::sim::{self, SweepSpec};
use skybatch::store::partition_catalog;
use skybatch::{
    BucketCache, BucketLayout, CatalogObject, CostConstants, HtmId, MatchObject, Policy, Predicate, Query,
    SimConfig, SimMetrics, UnitVec, WorkloadItem,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = o.pass && in_time;
    println!(
        "{} C{id} {name}: {} [{:.2}s, limit {}s{}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    pass
}

fn uniform_point(rng: &mut impl Rng) -> UnitVec {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    UnitVec::normalize(s * phi.cos(), s * phi.sin(), z).unwrap()
}

fn near(c: &UnitVec, spread: f64, rng: &mut impl Rng) -> UnitVec {
    let mut g = || rng.random_range(-spread..=spread);
    UnitVec::normalize(c.x + g(), c.y + g(), c.z + g()).unwrap()
}

// ---------------------------------------------------------------- C1

fn c1() -> Outcome {
    let c = CostConstants::new(1200.0, 0.13).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let resident = workload_throughput(100, true, &c).unwrap();
    let cold = workload_throughput(100, false, &c).unwrap();
    let e1 = rel(resident, 100.0 / 13.0) <= 1e-9 && rel(cold, 100.0 / 1213.0) <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut e2 = true;
    for _ in 0..1000 {
        let u: f64 = rng.random_range(0.0..10.0);
        let a: f64 = rng.random_range(0.0..1e6);
        let um = u + rng.random_range(0.01..5.0);
        let am = a + rng.random_range(0.0..1e5);
        e2 &= aged_throughput(u, a, 0.0, None).unwrap() == u;
        e2 &= aged_throughput(u, a, 1.0, None).unwrap() == a;
        e2 &= aged_throughput(u, a, 0.0, Some((um, am))).unwrap() == u / um;
        e2 &= aged_throughput(u, a, 1.0, Some((um, am))).unwrap() == a / am;
    }
    outcome(
        e1 && e2,
        format!("U_t resident={resident:.12} (100/13), cold={cold:.12} (100/1213); endpoints exact={e2}"),
    )
}

// ---------------------------------------------------------------- C2

fn c2() -> Outcome {
    let instances = 60;
    let mut failures = 0;
    let mut total_matches = 0;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(1..=1000usize);
        let m = rng.random_range(1..=500usize);
        let spread = 10f64.powf(rng.random_range(-3.0..-1.0));
        let c = uniform_point(&mut rng);
        let objs: Vec<_> = (0..n as u64)
            .map(|i| CatalogObject::new(i * 7 + 3, near(&c, spread, &mut rng)).unwrap())
            .collect();
        let bucket = partition_catalog(objs, n).unwrap().remove(0);
        let batch: Vec<WorkloadItem> = (0..m)
            .map(|p| {
                let radius = spread * 10f64.powf(rng.random_range(-2.5..-0.5));
                WorkloadItem {
                    query: rng.random_range(0..8),
                    probe: p as u32,
                    object: MatchObject::new(near(&c, spread, &mut rng), radius).unwrap(),
                    enqueue_us: 0,
                }
            })
            .collect();
        let flatten = |r: Vec<skybatch::MatchResult>| {
            let mut v: Vec<(u32, u32, u64)> =
                r.into_iter().flat_map(|r| r.matched.into_iter().map(move |id| (r.query, r.probe, id))).collect();
            v.sort_unstable();
            v
        };
        let mut want: Vec<(u32, u32, u64)> = Vec::new();
        for it in &batch {
            for o in &bucket.objects {
                if angular_distance(&it.object.pos, &o.pos) <= it.object.radius {
                    want.push((it.query, it.probe, o.object_id));
                }
            }
        }
        want.sort_unstable();
        let sweep = flatten(sweep_join(&bucket, &batch).unwrap());
        let index = flatten(index_join(&BucketIndex::new(&bucket).unwrap(), &batch));
        total_matches += want.len();
        if sweep != want || index != want {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{instances} instances, {total_matches} matched pairs, {failures} mismatching"),
    )
}

// ---------------------------------------------------------------- C3

/// True when the cap reaches into the spherical triangle `t`.
fn cap_meets_triangle(p: &UnitVec, r: f64, t: &[UnitVec; 3]) -> bool {
    if t.iter().any(|v| angular_distance(p, v) <= r) {
        return true;
    }
    // inside when p is on the same side of every edge as the centroid
    let g = UnitVec::normalize(t[0].x + t[1].x + t[2].x, t[0].y + t[1].y + t[2].y, t[0].z + t[1].z + t[2].z).unwrap();
    let edges = [(&t[0], &t[1]), (&t[1], &t[2]), (&t[2], &t[0])];
    if edges.iter().all(|(a, b)| a.cross(b).dot(p) * a.cross(b).dot(&g) >= 0.0) {
        return true;
    }
    for (a, b) in [(&t[0], &t[1]), (&t[1], &t[2]), (&t[2], &t[0])] {
        let n = a.cross(b);
        let n = UnitVec::normalize(n.x, n.y, n.z).unwrap();
        let h = p.dot(&n);
        let Ok(q) = UnitVec::normalize(p.x - h * n.x, p.y - h * n.y, p.z - h * n.z) else {
            continue;
        };
        if a.cross(&q).dot(&n) >= 0.0 && q.cross(b).dot(&n) >= 0.0 && h.abs().asin() <= r {
            return true;
        }
    }
    false
}

fn c3() -> Outcome {
    let level = 5;
    let trixels: Vec<(HtmId, [UnitVec; 3])> = HtmId::all_at(level).map(|t| (t, trixel_corners(t))).collect();
    let caps = 150;
    let results: Vec<(usize, usize)> = (0..caps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + i as u64);
            let p = uniform_point(&mut rng);
            let r = 10f64.powf(rng.random_range(-4.0..-0.3));
            let cover = cover_circle(&p, r, level).unwrap();
            let mut missing = 0;
            let mut hit = 0;
            for (t, corners) in &trixels {
                // shrink slightly so tangent contact is not demanded
                if cap_meets_triangle(&p, r * (1.0 - 1e-9), corners) {
                    hit += 1;
                    if !cover.iter().any(|rg| rg.contains(*t)) {
                        missing += 1;
                    }
                }
            }
            (hit, missing)
        })
        .collect();
    let hit: usize = results.iter().map(|r| r.0).sum();
    let missing: usize = results.iter().map(|r| r.1).sum();
    outcome(
        missing == 0 && results.iter().all(|r| r.0 > 0),
        format!("{caps} caps over {} level-5 trixels, {hit} intersecting, {missing} missed", trixels.len()),
    )
}

// ------------------------------------------------------------- C4..C7

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

struct SeedRuns {
    driven: Vec<SimMetrics>,
    rr: SimMetrics,
    noshare: SimMetrics,
}

impl SeedRuns {
    fn alpha(&self, a: f64) -> &SimMetrics {
        &self.driven[ALPHAS.iter().position(|&x| x == a).unwrap()]
    }
}

struct World {
    layout: BucketLayout,
    trace: Vec<Query>,
}

fn world(seed: u64) -> World {
    let cfg = GenConfig { seed, ..GenConfig::default() };
    let buckets = partition_catalog(generate_catalog(&cfg).unwrap(), cfg.capacity).unwrap();
    let layout = BucketLayout::from_buckets(&buckets, cfg.capacity);
    let (trace, _) = generate_trace(&cfg, &layout).unwrap();
    World { layout, trace }
}

fn worlds() -> &'static Vec<World> {
    static W: OnceLock<Vec<World>> = OnceLock::new();
    W.get_or_init(|| SEEDS.par_iter().map(|&s| world(s)).collect())
}

fn runs() -> &'static Vec<SeedRuns> {
    static R: OnceLock<Vec<SeedRuns>> = OnceLock::new();
    R.get_or_init(|| {
        worlds()
            .par_iter()
            .map(|w| {
                let go = |policy| sim::run(&w.trace, &w.layout, &SimConfig { policy, ..SimConfig::default() }).unwrap().metrics;
                let driven = ALPHAS.par_iter().map(|&a| go(Policy::data_driven(a, true).unwrap())).collect();
                SeedRuns { driven, rr: go(Policy::RoundRobin), noshare: go(Policy::NoShare) }
            })
            .collect()
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c4() -> Outcome {
    let r = runs();
    let per_seed = r
        .iter()
        .filter(|s| {
            let t0 = s.alpha(0.0).throughput_qps;
            t0 >= 1.5 * s.noshare.throughput_qps && t0 >= s.rr.throughput_qps
        })
        .count();
    let t0 = mean(r.iter().map(|s| s.alpha(0.0).throughput_qps));
    let ns = mean(r.iter().map(|s| s.noshare.throughput_qps));
    let rr = mean(r.iter().map(|s| s.rr.throughput_qps));
    outcome(
        per_seed >= 4,
        format!(
            "mean q/s alpha0={t0:.4} noshare={ns:.4} rr={rr:.4}; alpha0/noshare={:.3}, alpha0/rr={:.4}; holds on {per_seed}/5 seeds (need 4)",
            t0 / ns,
            t0 / rr
        ),
    )
}

fn c5() -> Outcome {
    let r = runs();
    let rr = mean(r.iter().map(|s| s.rr.throughput_qps));
    let a1 = mean(r.iter().map(|s| s.alpha(1.0).throughput_qps));
    let gap = (rr - a1).abs() / rr.max(a1);
    outcome(gap <= 0.15, format!("mean q/s rr={rr:.4} alpha1={a1:.4}; gap {:.2}% (max 15%)", 100.0 * gap))
}

fn c6() -> Outcome {
    let r = runs();
    let r0 = mean(r.iter().map(|s| s.alpha(0.0).mean_resp_ms));
    let r1 = mean(r.iter().map(|s| s.alpha(1.0).mean_resp_ms));
    let ns = mean(r.iter().map(|s| s.noshare.mean_resp_ms));
    let worst_driven = ALPHAS
        .iter()
        .map(|&a| mean(r.iter().map(|s| s.alpha(a).mean_resp_ms)))
        .fold(f64::MIN, f64::max);
    let ratio = r0 / r1;
    outcome(
        ratio >= 1.3 && ns >= worst_driven,
        format!(
            "mean resp ms alpha0={r0:.0} alpha1={r1:.0} ratio={ratio:.3} (min 1.3); noshare={ns:.0} vs worst alpha={worst_driven:.0}"
        ),
    )
}

fn c7() -> Outcome {
    let r = runs();
    let h0 = mean(r.iter().map(|s| s.alpha(0.0).cache_hit_rate));
    let h1 = mean(r.iter().map(|s| s.alpha(1.0).cache_hit_rate));
    outcome(
        h0 >= 2.0 * h1,
        format!("mean hit rate alpha0={h0:.3} alpha1={h1:.3}; factor {:.2} (min 2)", h0 / h1),
    )
}

// ---------------------------------------------------------------- C8

const LOW_RATE: f64 = 0.5;
const HIGH_RATE: f64 = 4.0;

fn c8_sweep() -> &'static sim::SweepResult {
    static S: OnceLock<sim::SweepResult> = OnceLock::new();
    S.get_or_init(|| {
        let w = &worlds()[0];
        let spec = SweepSpec { alphas: ALPHAS.to_vec(), rates: vec![LOW_RATE, HIGH_RATE], seeds: SEEDS.to_vec() };
        sim::sweep(&w.trace, &w.layout, &SimConfig::default(), &spec).unwrap()
    })
}

fn c8() -> Outcome {
    let res = c8_sweep();
    let low = select_alpha(&res.curves[0], 0.2).unwrap();
    let high = select_alpha(&res.curves[1], 0.2).unwrap();
    outcome(
        low.alpha > high.alpha,
        format!("tolerance 0.2: alpha {} at {LOW_RATE} q/s, alpha {} at {HIGH_RATE} q/s", low.alpha, high.alpha),
    )
}

/// Supplementary: the high-rate curve should not gain throughput as alpha
/// grows. Reported, but not one of the numbered criteria.
fn high_rate_shape() -> Outcome {
    let t: Vec<f64> = c8_sweep().curves[1].points.iter().map(|p| p.throughput_qps).collect();
    let ok = t.windows(2).all(|p| p[1] <= p[0]);
    let shown: Vec<String> = ALPHAS.iter().zip(&t).map(|(a, t)| format!("{a}:{t:.3}")).collect();
    outcome(ok, format!("throughput q/s by alpha at {HIGH_RATE} q/s: {}", shown.join(" ")))
}

// ---------------------------------------------------------------- C9

fn cli(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_skybatch")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn c9() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    cli(d, &["build", "--out", "bk", "--n", "64000", "--capacity", "1000", "--seed", "2"]);
    cli(d, &["gen", "--buckets", "bk", "--out", "t.trace", "--queries", "500", "--hotspots", "64", "--seed", "2"]);
    let mut checked = 0;
    let mut differing = Vec::new();
    let runs: [&[&str]; 4] = [
        &["run", "--buckets", "bk", "--trace", "t.trace", "--alpha", "0.5", "--explain", "--out", "OUT/m.csv"],
        &["run", "--buckets", "bk", "--trace", "t.trace", "--policy", "rr", "--rate", "3", "--seed", "9", "--out", "OUT/m.csv"],
        &["run", "--buckets", "bk", "--trace", "t.trace", "--policy", "noshare", "--out", "OUT/m.csv"],
        &["sweep", "--buckets", "bk", "--trace", "t.trace", "--rates", "1,3", "--alphas", "0,0.5,1", "--seeds", "1,2,3", "--out", "OUT"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in ["a", "b"] {
            let dir = format!("r{i}{rep}");
            let args: Vec<String> = args.iter().map(|a| a.replace("OUT", &dir)).collect();
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let stdout = cli(d, &args);
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(d.join(&dir))
                .unwrap()
                .map(|e| {
                    let e = e.unwrap();
                    (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
                })
                .collect();
            files.sort();
            outputs.push((stdout, files));
        }
        checked += 1 + outputs[0].1.len();
        if outputs[0] != outputs[1] {
            differing.push(args[0]);
        }
    }
    outcome(
        differing.is_empty(),
        format!("4 invocations run twice, {checked} outputs compared, differing: {differing:?}"),
    )
}

// ---------------------------------------------------------------- C10

const CASES: u32 = 256;

fn small_world(seed: u64, n: usize, cap: usize) -> BucketLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objs: Vec<_> = (0..n as u64).map(|i| CatalogObject::new(i, uniform_point(&mut rng)).unwrap()).collect();
    let buckets = partition_catalog(objs, cap).unwrap();
    BucketLayout::from_buckets(&buckets, cap)
}

fn small_trace(seed: u64, n_queries: usize, max_probes: usize, rate_per_ms: f64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hot: Vec<UnitVec> = (0..3).map(|_| uniform_point(&mut rng)).collect();
    let mut t = 0.0;
    (0..n_queries)
        .map(|id| {
            t += -(1.0 - rng.random::<f64>()).ln() / rate_per_ms;
            let c = hot[rng.random_range(0..hot.len())];
            let k = rng.random_range(1..=max_probes);
            let objs = (0..k)
                .map(|_| {
                    let p = if rng.random_bool(0.1) { uniform_point(&mut rng) } else { near(&c, 0.05, &mut rng) };
                    MatchObject::new(p, 10f64.powf(rng.random_range(-5.5..-3.0))).unwrap()
                })
                .collect();
            Query::new(id as u32, t, objs, Predicate::All).unwrap()
        })
        .collect()
}

fn policy_strategy() -> impl Strategy<Value = Policy> {
    prop_oneof![
        (0.0..=1.0f64, any::<bool>()).prop_map(|(a, n)| Policy::data_driven(a, n).unwrap()),
        Just(Policy::RoundRobin),
        Just(Policy::NoShare),
    ]
}

fn conservation(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (any::<u64>(), 1usize..40, 1usize..30, 0.001f64..0.05, policy_strategy(), 0usize..8);
    runner
        .run(&strat, |(seed, nq, np, rate, policy, cache)| {
            let layout = small_world(seed, 3000, 150);
            let trace = small_trace(seed ^ 0x5eed, nq, np, rate);
            let cfg = SimConfig { policy, cache_buckets: cache, ..SimConfig::default() };
            let rep = sim::run(&trace, &layout, &cfg).unwrap();
            let m = &rep.metrics;
            prop_assert_eq!(m.items_enqueued, m.items_resolved);
            prop_assert_eq!(m.completed, nq);
            prop_assert_eq!(rep.outcomes.len(), nq);
            for o in &rep.outcomes {
                prop_assert!(o.completion_us >= o.arrival_us);
                prop_assert!(o.response_ms() >= 0.0);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn partition_identity(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (any::<u64>(), 1usize..3000, 1usize..400);
    runner
        .run(&strat, |(seed, n, cap)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let objs: Vec<_> = (0..n as u64)
                .map(|i| CatalogObject::new(i, if i % 5 == 0 { near(&UnitVec::from_radec(1.0, 0.3), 1e-6, &mut rng) } else { uniform_point(&mut rng) }).unwrap())
                .collect();
            let buckets = partition_catalog(objs.clone(), cap).unwrap();
            let layout = BucketLayout::from_buckets(&buckets, cap);
            prop_assert!(layout.validate().is_ok());
            prop_assert_eq!(buckets.len(), n.div_ceil(cap));
            let mut homes: std::collections::HashMap<u32, Vec<usize>> = std::collections::HashMap::new();
            for (i, b) in buckets.iter().enumerate() {
                prop_assert_eq!(b.index, i);
                if i + 1 < buckets.len() {
                    prop_assert_eq!(b.objects.len(), cap);
                }
                prop_assert!(b.is_sorted());
                for o in &b.objects {
                    homes.entry(o.htm.raw()).or_default().push(i);
                }
            }
            // ids not split across a cut live inside their bucket's range
            for (i, b) in buckets.iter().enumerate() {
                for o in &b.objects {
                    if homes[&o.htm.raw()].iter().all(|&h| h == i) {
                        prop_assert!(b.range.contains(o.htm));
                        prop_assert_eq!(layout.locate(o.htm), Some(i));
                    }
                }
            }
            let back: Vec<_> = buckets.iter().flat_map(|b| b.objects.iter().copied()).collect();
            let mut want = objs;
            want.sort_by_key(|o| (o.htm, o.object_id));
            prop_assert_eq!(back, want);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Reference LRU: most recently used at the back.
struct RefLru {
    cap: usize,
    order: VecDeque<usize>,
    hits: u64,
    misses: u64,
}

impl RefLru {
    fn access(&mut self, b: usize, admit: bool) -> bool {
        if let Some(pos) = self.order.iter().position(|&x| x == b) {
            self.order.remove(pos);
            self.order.push_back(b);
            self.hits += 1;
            return true;
        }
        self.misses += 1;
        if admit && self.cap > 0 {
            if self.order.len() == self.cap {
                self.order.pop_front();
            }
            self.order.push_back(b);
        }
        false
    }
}

fn lru_equivalence(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (0usize..9, prop::collection::vec((0usize..20, any::<bool>()), 0..400));
    runner
        .run(&strat, |(cap, ops)| {
            let mut cache = BucketCache::new(cap);
            let mut oracle = RefLru { cap, order: VecDeque::new(), hits: 0, misses: 0 };
            for (b, admit) in ops {
                let got = if admit { cache.touch(b) } else { cache.probe(b) };
                prop_assert_eq!(got, oracle.access(b, admit));
                prop_assert_eq!(cache.resident(), oracle.order.iter().copied().collect::<Vec<_>>());
            }
            prop_assert_eq!(cache.hits(), oracle.hits);
            prop_assert_eq!(cache.misses(), oracle.misses);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn manager_conservation(runner: &mut TestRunner) -> Result<(), String> {
    use skybatch::workload::preprocess_query;
    use skybatch::WorkloadManager;
    let strat = (any::<u64>(), 1usize..25, prop::collection::vec(any::<u8>(), 1..200));
    runner
        .run(&strat, |(seed, nq, steps)| {
            let layout = small_world(seed, 1200, 100);
            let trace = small_trace(seed.rotate_left(7), nq, 20, 0.01);
            let mut mgr = WorkloadManager::new(layout.len(), usize::MAX);
            let mut next = 0;
            let mut now = 0;
            let mut in_flight: Vec<WorkloadItem> = Vec::new();
            let step = |mgr: &mut WorkloadManager, s: u8, now: u64, next: &mut usize, in_flight: &mut Vec<WorkloadItem>| {
                if s.is_multiple_of(3) && *next < trace.len() {
                    mgr.enqueue(preprocess_query(&trace[*next], &layout).unwrap(), now).unwrap();
                    *next += 1;
                } else {
                    let first = mgr.non_empty().next();
                    if let Some(b) = first {
                        in_flight.extend(mgr.drain_bucket(b).unwrap());
                    }
                }
                if s.is_multiple_of(2) {
                    mgr.resolve(&std::mem::take(in_flight), now).unwrap();
                }
            };
            for s in steps {
                now += 1;
                step(&mut mgr, s, now, &mut next, &mut in_flight);
                prop_assert!(mgr.is_conserved());
            }
            // finish: everything arrives, every queue drains, all resolves
            while next < trace.len() || mgr.non_empty().next().is_some() || !in_flight.is_empty() {
                now += 1;
                step(&mut mgr, 0, now, &mut next, &mut in_flight);
                step(&mut mgr, 1, now, &mut next, &mut in_flight);
                prop_assert!(mgr.is_conserved());
            }
            prop_assert_eq!(mgr.enqueued_total(), mgr.resolved_total());
            prop_assert_eq!(mgr.tracker().incomplete_count(), 0);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn c10() -> Outcome {
    type Prop = fn(&mut TestRunner) -> Result<(), String>;
    let props: [(&str, Prop); 4] = [
        ("sim conservation", conservation),
        ("manager conservation", manager_conservation),
        ("partition identity", partition_identity),
        ("lru oracle", lru_equivalence),
    ];
    let results: Vec<(&str, Result<(), String>)> = props
        .par_iter()
        .map(|(name, f)| {
            let mut runner = TestRunner::new(PtConfig { cases: CASES, failure_persistence: None, ..PtConfig::default() });
            (*name, f(&mut runner))
        })
        .collect();
    let failed: Vec<String> =
        results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    outcome(
        failed.is_empty(),
        format!("{} properties x {CASES} cases = {} cases; failed: {failed:?}", props.len(), props.len() as u32 * CASES),
    )
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, "throughput and blend arithmetic", secs(1), c1);
    all &= report(2, "join oracle equivalence", secs(30), c2);
    all &= report(3, "HTM cover oracle", secs(30), c3);
    let start = Instant::now();
    runs();
    println!("     (default-trace simulations for C4-C7: {:.1}s)", start.elapsed().as_secs_f64());
    all &= report(4, "throughput ordering", secs(300), c4);
    all &= report(5, "RR close to alpha=1", secs(300), c5);
    all &= report(6, "response-time ordering", secs(300), c6);
    all &= report(7, "cache-hit contrast", secs(300), c7);
    all &= report(8, "saturation trade-off shape", secs(300), c8);
    all &= report(9, "determinism", secs(300), c9);
    all &= report(10, "conservation suite", secs(60), c10);
    let start = Instant::now();
    let s = high_rate_shape();
    println!(
        "{} supplementary (not a numbered criterion) high-rate throughput non-increasing in alpha: {} [{:.2}s]",
        if s.pass { "PASS" } else { "FAIL" },
        s.detail,
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
