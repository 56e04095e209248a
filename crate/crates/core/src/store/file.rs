//! Bucket directory: a text `manifest` plus one `bucket_<index>.bin` per bucket.
//!
//! Bucket files are little-endian:
//!
//! ```text
//! magic    8 bytes  "SKYBKT01"
//! count    u64
//! records  count x { object_id u64, htm u32, x f64, y f64, z f64 }   (36 bytes each)
//! crc32    u32 over everything above
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{Bucket, BucketLayout, BucketSource, CatalogObject};
use crate::error::{Error, Result};
use crate::htm::{HtmId, HtmRange, UnitVec};

pub const BUCKET_MAGIC: &[u8; 8] = b"SKYBKT01";
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 36;
const MANIFEST: &str = "manifest";

fn bucket_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("bucket_{index}.bin"))
}

fn encode(bucket: &Bucket) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * bucket.objects.len() + 4);
    buf.extend_from_slice(BUCKET_MAGIC);
    buf.extend_from_slice(&(bucket.objects.len() as u64).to_le_bytes());
    for o in &bucket.objects {
        buf.extend_from_slice(&o.object_id.to_le_bytes());
        buf.extend_from_slice(&o.htm.raw().to_le_bytes());
        buf.extend_from_slice(&o.pos.x.to_le_bytes());
        buf.extend_from_slice(&o.pos.y.to_le_bytes());
        buf.extend_from_slice(&o.pos.z.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8 bytes"))
}

fn decode(index: usize, range: HtmRange, bytes: &[u8]) -> Result<Bucket> {
    let corrupt = |detail: String| Error::Corrupt { bucket: index, detail };
    if bytes.len() < HEADER_LEN + 4 {
        return Err(corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != BUCKET_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let count = le_u64(&bytes[8..16]) as usize;
    let expected = count
        .checked_mul(RECORD_LEN)
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| corrupt(format!("absurd record count {count}")))?;
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "length {} does not match {count} records",
            bytes.len()
        )));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(corrupt(format!("checksum mismatch: stored {stored:#010x}, computed {actual:#010x}")));
    }
    let mut objects = Vec::with_capacity(count);
    for rec in body[HEADER_LEN..].chunks_exact(RECORD_LEN) {
        let object_id = le_u64(&rec[0..8]);
        let raw = u32::from_le_bytes(rec[8..12].try_into().expect("4 bytes"));
        let htm = HtmId::new(raw).map_err(|_| corrupt(format!("object {object_id} has invalid id {raw:#x}")))?;
        let pos = UnitVec::new(le_f64(&rec[12..20]), le_f64(&rec[20..28]), le_f64(&rec[28..36]))
            .map_err(|e| corrupt(format!("object {object_id}: {e}")))?;
        objects.push(CatalogObject { object_id, htm, pos });
    }
    Ok(Bucket { index, range, objects })
}

fn render_manifest(layout: &BucketLayout, header: &[String]) -> String {
    let mut s = String::new();
    for line in header {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "capacity={}", layout.capacity);
    let _ = writeln!(s, "buckets={}", layout.len());
    let _ = writeln!(s, "layout_hash={:08x}", layout.layout_hash());
    let _ = writeln!(s, "index,lo,hi,count");
    for (i, (r, c)) in layout.ranges.iter().zip(&layout.counts).enumerate() {
        let _ = writeln!(s, "{i},{},{},{c}", r.lo, r.hi);
    }
    s
}

/// Writes every bucket file and the manifest into `dir` (created if needed).
/// `header` lines are echoed as `#` comments at the top of the manifest.
pub fn write_buckets(buckets: &[Bucket], capacity: usize, dir: &Path, header: &[String]) -> Result<BucketLayout> {
    fs::create_dir_all(dir).map_err(|e| Error::storage(None, dir, e))?;
    for b in buckets {
        let path = bucket_path(dir, b.index);
        let mut f = fs::File::create(&path).map_err(|e| Error::storage(Some(b.index), &path, e))?;
        f.write_all(&encode(b)).map_err(|e| Error::storage(Some(b.index), &path, e))?;
    }
    let layout = BucketLayout::from_buckets(buckets, capacity);
    let path = dir.join(MANIFEST);
    fs::write(&path, render_manifest(&layout, header)).map_err(|e| Error::storage(None, &path, e))?;
    Ok(layout)
}

fn parse_field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Config(format!("manifest: expected `{key}=<value>`, found `{line}`")))
}

/// Parses the manifest in `dir` and checks that its ranges tile the id space.
pub fn read_manifest(dir: &Path) -> Result<BucketLayout> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::storage(None, &path, e))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Config(format!("manifest truncated before {what}")))
    };
    let capacity: usize = parse_field(next("capacity")?, "capacity")?;
    let n: usize = parse_field(next("buckets")?, "buckets")?;
    let hash_line = next("layout_hash")?;
    let stored_hash = hash_line
        .strip_prefix("layout_hash=")
        .and_then(|h| u32::from_str_radix(h.trim(), 16).ok())
        .ok_or_else(|| Error::Config(format!("manifest: bad layout_hash line `{hash_line}`")))?;
    let columns = next("column header")?;
    if columns != "index,lo,hi,count" {
        return Err(Error::Config(format!("manifest: unexpected column header `{columns}`")));
    }
    let mut ranges = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for i in 0..n {
        let row = next("bucket rows")?;
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        let parsed = (fields.len() == 4)
            .then(|| {
                Some((
                    fields[0].parse::<usize>().ok()?,
                    fields[1].parse::<u32>().ok()?,
                    fields[2].parse::<u32>().ok()?,
                    fields[3].parse::<usize>().ok()?,
                ))
            })
            .flatten();
        let (idx, lo, hi, count) =
            parsed.ok_or_else(|| Error::Config(format!("manifest: malformed bucket row `{row}`")))?;
        if idx != i {
            return Err(Error::Config(format!("manifest: row {i} carries index {idx}")));
        }
        ranges.push(HtmRange::new(HtmId::new(lo)?, HtmId::new(hi)?)?);
        counts.push(count);
    }
    let layout = BucketLayout { capacity, ranges, counts };
    layout.validate().map_err(|e| Error::Config(format!("manifest: {e}")))?;
    if layout.layout_hash() != stored_hash {
        return Err(Error::Config("manifest: layout hash does not match its rows".into()));
    }
    Ok(layout)
}

/// A bucket directory opened for reading.
#[derive(Clone, Debug)]
pub struct BucketDir {
    dir: PathBuf,
    layout: BucketLayout,
}

impl BucketDir {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let layout = read_manifest(&dir)?;
        Ok(BucketDir { dir, layout })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn read_bucket(&self, index: usize) -> Result<Bucket> {
        let range = *self
            .layout
            .ranges
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("bucket {index} out of range (have {})", self.layout.len())))?;
        let path = bucket_path(&self.dir, index);
        let bytes = fs::read(&path).map_err(|e| Error::storage(Some(index), &path, e))?;
        let bucket = decode(index, range, &bytes)?;
        if bucket.objects.len() != self.layout.counts[index] {
            return Err(Error::Corrupt {
                bucket: index,
                detail: format!(
                    "{} records but manifest lists {}",
                    bucket.objects.len(),
                    self.layout.counts[index]
                ),
            });
        }
        Ok(bucket)
    }
}

impl BucketSource for BucketDir {
    fn layout(&self) -> &BucketLayout {
        &self.layout
    }

    fn load(&self, index: usize) -> Result<Arc<Bucket>> {
        self.read_bucket(index).map(Arc::new)
    }
}
