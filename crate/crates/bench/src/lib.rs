//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skybatch::gen::{generate_catalog, generate_trace, GenConfig};
use skybatch::store::partition_catalog;
use skybatch::{Bucket, BucketLayout, CatalogObject, MatchObject, Query, UnitVec, WorkloadItem};

/// The default desk-scale catalog and trace for `seed`.
pub struct World {
    pub buckets: Vec<Bucket>,
    pub layout: BucketLayout,
    pub trace: Vec<Query>,
}

pub fn default_world(seed: u64) -> World {
    let cfg = GenConfig { seed, ..GenConfig::default() };
    let buckets = partition_catalog(generate_catalog(&cfg).expect("catalog"), cfg.capacity).expect("partition");
    let layout = BucketLayout::from_buckets(&buckets, cfg.capacity);
    let (trace, _) = generate_trace(&cfg, &layout).expect("trace");
    World { buckets, layout, trace }
}

pub fn random_points(n: usize, seed: u64) -> Vec<UnitVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            UnitVec::normalize(s * phi.cos(), s * phi.sin(), z).expect("unit")
        })
        .collect()
}

/// One bucket of `n` clustered objects and `m` probes of 1 to 30 arcsec
/// around the same spot.
pub fn join_instance(n: usize, m: usize, seed: u64) -> (Bucket, Vec<WorkloadItem>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_points(1, seed ^ 0xabcd)[0];
    let spread = 0.002;
    let near = |rng: &mut ChaCha8Rng| {
        let mut g = || rng.random_range(-spread..spread);
        UnitVec::normalize(c.x + g(), c.y + g(), c.z + g()).expect("unit")
    };
    let objs: Vec<_> = (0..n as u64).map(|i| CatalogObject::new(i, near(&mut rng)).expect("object")).collect();
    let bucket = partition_catalog(objs, n).expect("partition").remove(0);
    let arcsec = std::f64::consts::PI / (180.0 * 3600.0);
    let batch = (0..m)
        .map(|p| WorkloadItem {
            query: (p % 16) as u32,
            probe: p as u32,
            object: MatchObject::new(near(&mut rng), rng.random_range(1.0..30.0) * arcsec).expect("probe"),
            enqueue_us: 0,
        })
        .collect();
    (bucket, batch)
}
