//! Equal-count bucket partitioning of a point catalog along the HTM curve.

mod cache;
mod file;

use std::ops::Range;
use std::sync::Arc;

pub use cache::BucketCache;
pub use file::{read_manifest, write_buckets, BucketDir, BUCKET_MAGIC, HEADER_LEN, RECORD_LEN};

use crate::error::{Error, Result};
use crate::htm::{point_to_htm, HtmId, HtmRange, UnitVec, MAX_LEVEL};

/// One catalog row: id, level-14 trixel and position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogObject {
    pub object_id: u64,
    pub htm: HtmId,
    pub pos: UnitVec,
}

impl CatalogObject {
    pub fn new(object_id: u64, pos: UnitVec) -> Result<Self> {
        Ok(CatalogObject {
            object_id,
            htm: point_to_htm(&pos, MAX_LEVEL)?,
            pos,
        })
    }

    /// Synthetic brightness attribute used by magnitude-band predicates.
    ///
    /// Derived from the object id so that it survives the fixed-width bucket
    /// record without an extra column. Uniform in `[12, 24)`.
    pub fn magnitude(&self) -> f64 {
        magnitude_of(self.object_id)
    }
}

pub fn magnitude_of(object_id: u64) -> f64 {
    // splitmix64 finalizer
    let mut z = object_id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    12.0 + 12.0 * ((z >> 11) as f64 / (1u64 << 53) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    pub index: usize,
    pub range: HtmRange,
    pub objects: Vec<CatalogObject>,
}

impl Bucket {
    pub fn is_sorted(&self) -> bool {
        self.objects.windows(2).all(|w| w[0].htm <= w[1].htm)
    }
}

/// Cuts the htm-sorted catalog into runs of `capacity` objects.
///
/// Ranges tile the whole level-14 id space: bucket 0 starts at the first
/// level-14 id, bucket `i` ends one below bucket `i + 1`'s first object, and
/// the last bucket ends at the last level-14 id. A run of equal ids that
/// straddles a cut is split anyway, keeping bucket sizes exact.
pub fn partition_catalog(mut objects: Vec<CatalogObject>, capacity: usize) -> Result<Vec<Bucket>> {
    if capacity == 0 {
        return Err(Error::InvalidInput("bucket capacity must be at least 1".into()));
    }
    if objects.is_empty() {
        return Err(Error::InvalidInput("cannot partition an empty catalog".into()));
    }
    if let Some(o) = objects.iter().find(|o| o.htm.level() != MAX_LEVEL) {
        return Err(Error::InvalidInput(format!(
            "object {} has a level-{} id; expected level {MAX_LEVEL}",
            o.object_id,
            o.htm.level()
        )));
    }
    objects.sort_by_key(|o| (o.htm, o.object_id));

    let chunks: Vec<Vec<CatalogObject>> = objects.chunks(capacity).map(<[_]>::to_vec).collect();
    let starts: Vec<u32> = chunks.iter().map(|c| c[0].htm.raw()).collect();
    let n = chunks.len();
    let mut buckets = Vec::with_capacity(n);
    for (index, objects) in chunks.into_iter().enumerate() {
        let lo = if index == 0 {
            HtmId::first_at(MAX_LEVEL)
        } else {
            HtmId::new(starts[index])?
        };
        let hi = if index + 1 == n {
            HtmId::last_at(MAX_LEVEL)
        } else {
            // Equal ids across the cut would make the next start equal to
            // this one; keep ranges non-empty by clamping.
            HtmId::new((starts[index + 1] - 1).max(lo.raw()))?
        };
        buckets.push(Bucket {
            index,
            range: HtmRange::new(lo, hi)?,
            objects,
        });
    }
    fix_degenerate_starts(&mut buckets)?;
    Ok(buckets)
}

/// When several consecutive cuts fall inside one run of equal ids, the
/// clamped ranges above could overlap. Push such starts forward so ranges
/// stay disjoint and ascending.
fn fix_degenerate_starts(buckets: &mut [Bucket]) -> Result<()> {
    for i in 1..buckets.len() {
        let prev_hi = buckets[i - 1].range.hi.raw();
        if buckets[i].range.lo.raw() <= prev_hi {
            let lo = prev_hi
                .checked_add(1)
                .ok_or_else(|| Error::Invariant("bucket ranges exhausted the id space".into()))?;
            let hi = buckets[i].range.hi.raw().max(lo);
            buckets[i].range = HtmRange::new(HtmId::new(lo)?, HtmId::new(hi)?)?;
        }
    }
    Ok(())
}

/// Bucket ranges without their objects; all a scheduler needs.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketLayout {
    pub capacity: usize,
    pub ranges: Vec<HtmRange>,
    pub counts: Vec<usize>,
}

impl BucketLayout {
    pub fn from_buckets(buckets: &[Bucket], capacity: usize) -> Self {
        BucketLayout {
            capacity,
            ranges: buckets.iter().map(|b| b.range).collect(),
            counts: buckets.iter().map(|b| b.objects.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Bucket holding `id`, if the layout covers it.
    pub fn locate(&self, id: HtmId) -> Option<usize> {
        let i = self.ranges.partition_point(|r| r.hi < id);
        (i < self.ranges.len() && self.ranges[i].contains(id)).then_some(i)
    }

    /// Indices of the buckets whose ranges overlap `range`.
    pub fn overlapping(&self, range: &HtmRange) -> Range<usize> {
        let start = self.ranges.partition_point(|r| r.hi < range.lo);
        let end = self.ranges.partition_point(|r| r.lo <= range.hi);
        start..end.max(start)
    }

    /// Checks that the ranges are ascending, disjoint and gap-free over the
    /// level-14 id space.
    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(Error::InvalidInput("layout has no buckets".into()));
        }
        if self.ranges[0].lo != HtmId::first_at(MAX_LEVEL)
            || self.ranges[self.len() - 1].hi != HtmId::last_at(MAX_LEVEL)
        {
            return Err(Error::InvalidInput("bucket ranges do not span the id space".into()));
        }
        for w in self.ranges.windows(2) {
            if w[0].hi.raw().checked_add(1) != Some(w[1].lo.raw()) {
                return Err(Error::InvalidInput(format!(
                    "bucket ranges [{}, {}] and [{}, {}] do not tile",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        Ok(())
    }

    /// CRC-32 over the capacity and the range bounds. Traces record it so a
    /// trace is never replayed against a different partitioning.
    pub fn layout_hash(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        h.update(&(self.capacity as u64).to_le_bytes());
        h.update(&(self.ranges.len() as u64).to_le_bytes());
        for r in &self.ranges {
            h.update(&r.lo.raw().to_le_bytes());
            h.update(&r.hi.raw().to_le_bytes());
        }
        h.finalize()
    }
}

/// Anything that can hand out buckets by index.
pub trait BucketSource {
    fn layout(&self) -> &BucketLayout;
    fn load(&self, index: usize) -> Result<Arc<Bucket>>;
}

/// Buckets held in memory, shared immutably.
#[derive(Clone, Debug)]
pub struct InMemoryBuckets {
    layout: BucketLayout,
    buckets: Vec<Arc<Bucket>>,
}

impl InMemoryBuckets {
    pub fn new(buckets: Vec<Bucket>, capacity: usize) -> Self {
        let layout = BucketLayout::from_buckets(&buckets, capacity);
        InMemoryBuckets {
            layout,
            buckets: buckets.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn buckets(&self) -> &[Arc<Bucket>] {
        &self.buckets
    }
}

impl BucketSource for InMemoryBuckets {
    fn layout(&self) -> &BucketLayout {
        &self.layout
    }

    fn load(&self, index: usize) -> Result<Arc<Bucket>> {
        self.buckets
            .get(index)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("bucket {index} out of range")))
    }
}
