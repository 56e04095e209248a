//! Hierarchical triangular mesh (HTM) on the unit sphere.
//!
//! The sphere starts as the eight faces of an octahedron: S0..S3 carry ids
//! 8..11 and N0..N3 carry ids 12..15. Every level splits a trixel into four
//! children at its normalized edge midpoints and appends two bits to the id,
//! so child `k` of trixel `t` is `4t + k` and a level-`L` id is `4 + 2L` bits
//! wide with the leading bit set. Level 14 ids fill a `u32` exactly.
//!
//! Sorting ids numerically walks a space-filling curve over the sphere:
//! points that are close on the sky tend to have close ids.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Deepest supported level; level-14 ids are 32 bits wide.
pub const MAX_LEVEL: u8 = 14;

const NORM_TOLERANCE: f64 = 1e-6;
const COVER_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVec {
    pub const X: UnitVec = UnitVec::raw(1.0, 0.0, 0.0);
    pub const Y: UnitVec = UnitVec::raw(0.0, 1.0, 0.0);
    pub const Z: UnitVec = UnitVec::raw(0.0, 0.0, 1.0);

    pub(crate) const fn raw(x: f64, y: f64, z: f64) -> Self {
        UnitVec { x, y, z }
    }

    /// Accepts a vector whose norm is within 1e-6 of one. Vectors already
    /// unit to rounding are kept bit-for-bit; others are renormalized.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "vector ({x}, {y}, {z}) is not unit length (norm {n})"
            )));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(UnitVec::raw(x, y, z));
        }
        Ok(UnitVec::raw(x / n, y / n, z / n))
    }

    /// Scales any finite non-zero vector onto the sphere.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput(format!(
                "cannot normalize vector ({x}, {y}, {z})"
            )));
        }
        Ok(UnitVec::raw(x / n, y / n, z / n))
    }

    /// Position from right ascension and declination, both in radians.
    pub fn from_radec(ra: f64, dec: f64) -> Self {
        let (sd, cd) = dec.sin_cos();
        let (sr, cr) = ra.sin_cos();
        UnitVec::raw(cd * cr, cd * sr, sd)
    }

    pub fn dot(&self, o: &UnitVec) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Cross product; the result is generally not unit length.
    pub fn cross(&self, o: &UnitVec) -> UnitVec {
        UnitVec::raw(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Great-circle separation in radians, via `atan2(|a×b|, a·b)` which
    /// stays accurate at tiny separations.
    pub fn angle_to(&self, o: &UnitVec) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    fn add(&self, o: &UnitVec) -> UnitVec {
        UnitVec::raw(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    fn scaled_unit(self) -> UnitVec {
        let n = self.norm();
        UnitVec::raw(self.x / n, self.y / n, self.z / n)
    }
}

pub fn angular_distance(a: &UnitVec, b: &UnitVec) -> f64 {
    a.angle_to(b)
}

/// A trixel identifier. Always well formed: see [`HtmId::new`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HtmId(u32);

impl HtmId {
    /// Validates the leading-bit layout of a raw id.
    pub fn new(raw: u32) -> Result<Self> {
        if raw < 8 {
            return Err(Error::InvalidId(raw));
        }
        let bits = 32 - raw.leading_zeros();
        if !(bits - 4).is_multiple_of(2) {
            return Err(Error::InvalidId(raw));
        }
        Ok(HtmId(raw))
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn level(self) -> u8 {
        ((32 - self.0.leading_zeros() - 4) / 2) as u8
    }

    pub fn parent(self) -> Option<HtmId> {
        (self.level() > 0).then_some(HtmId(self.0 >> 2))
    }

    pub fn children(self) -> Option<[HtmId; 4]> {
        (self.level() < MAX_LEVEL).then(|| {
            let base = self.0 << 2;
            [HtmId(base), HtmId(base + 1), HtmId(base + 2), HtmId(base + 3)]
        })
    }

    /// Smallest id at `level` (the first child path of S0).
    pub fn first_at(level: u8) -> HtmId {
        HtmId(8u32 << (2 * level as u32))
    }

    /// Largest id at `level`.
    pub fn last_at(level: u8) -> HtmId {
        HtmId(((16u64 << (2 * level as u32)) - 1) as u32)
    }

    /// Number of trixels at `level`.
    pub fn count_at(level: u8) -> u64 {
        8u64 << (2 * level as u32)
    }

    /// All ids at `level` in ascending order.
    pub fn all_at(level: u8) -> impl Iterator<Item = HtmId> {
        (Self::first_at(level).0..=Self::last_at(level).0).map(HtmId)
    }

    /// The range of descendants of `self` at a deeper `level`.
    pub fn descendants_at(self, level: u8) -> HtmRange {
        let shift = 2 * (level - self.level()) as u32;
        let lo = (self.0 as u64) << shift;
        let hi = ((self.0 as u64 + 1) << shift) - 1;
        HtmRange {
            lo: HtmId(lo as u32),
            hi: HtmId(hi as u32),
        }
    }
}

impl std::fmt::Display for HtmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inclusive id interval `[lo, hi]` at a single level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HtmRange {
    pub lo: HtmId,
    pub hi: HtmId,
}

impl HtmRange {
    pub fn new(lo: HtmId, hi: HtmId) -> Result<Self> {
        if lo.level() != hi.level() {
            return Err(Error::InvalidInput(format!(
                "range ends at different levels ({} vs {})",
                lo.level(),
                hi.level()
            )));
        }
        if lo > hi {
            return Err(Error::InvalidInput(format!("range [{lo}, {hi}] is reversed")));
        }
        Ok(HtmRange { lo, hi })
    }

    pub fn single(id: HtmId) -> Self {
        HtmRange { lo: id, hi: id }
    }

    pub fn level(&self) -> u8 {
        self.lo.level()
    }

    pub fn contains(&self, id: HtmId) -> bool {
        self.lo <= id && id <= self.hi
    }

    pub fn overlaps(&self, other: &HtmRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Number of ids in the range (never zero).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u64 {
        (self.hi.0 - self.lo.0) as u64 + 1
    }
}

type Tri = [UnitVec; 3];

const V0: UnitVec = UnitVec::raw(0.0, 0.0, 1.0);
const V1: UnitVec = UnitVec::raw(1.0, 0.0, 0.0);
const V2: UnitVec = UnitVec::raw(0.0, 1.0, 0.0);
const V3: UnitVec = UnitVec::raw(-1.0, 0.0, 0.0);
const V4: UnitVec = UnitVec::raw(0.0, -1.0, 0.0);
const V5: UnitVec = UnitVec::raw(0.0, 0.0, -1.0);

/// Root trixels in id order 8..15 (S0..S3, N0..N3), corners counter-clockwise
/// seen from outside the sphere.
const ROOTS: [Tri; 8] = [
    [V1, V5, V2],
    [V2, V5, V3],
    [V3, V5, V4],
    [V4, V5, V1],
    [V1, V0, V4],
    [V4, V0, V3],
    [V3, V0, V2],
    [V2, V0, V1],
];

fn midpoint(a: &UnitVec, b: &UnitVec) -> UnitVec {
    a.add(b).scaled_unit()
}

fn subdivide(t: &Tri) -> [Tri; 4] {
    let [v0, v1, v2] = *t;
    let w0 = midpoint(&v1, &v2);
    let w1 = midpoint(&v0, &v2);
    let w2 = midpoint(&v0, &v1);
    [[v0, w2, w1], [v1, w0, w2], [v2, w1, w0], [w0, w1, w2]]
}

/// Smallest of the three edge-plane tests; non-negative iff `p` is inside.
fn inside_score(t: &Tri, p: &UnitVec) -> f64 {
    let a = t[0].cross(&t[1]).dot(p);
    let b = t[1].cross(&t[2]).dot(p);
    let c = t[2].cross(&t[0]).dot(p);
    a.min(b).min(c)
}

/// First candidate containing `p`; if rounding leaves `p` outside all of
/// them, the candidate it is closest to being inside.
fn pick(cands: &[Tri], p: &UnitVec) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, t) in cands.iter().enumerate() {
        let s = inside_score(t, p);
        if s >= 0.0 {
            return i;
        }
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

fn check_level(level: u8) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidInput(format!(
            "level {level} exceeds maximum {MAX_LEVEL}"
        )));
    }
    Ok(())
}

fn check_unit(p: &UnitVec) -> Result<()> {
    let n = p.norm();
    if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidInput(format!("point is not unit length (norm {n})")));
    }
    Ok(())
}

/// The trixel at `level` whose spherical triangle contains `p`.
///
/// Points on a shared edge or corner go to the lowest-numbered containing
/// trixel at every step of the descent.
pub fn point_to_htm(p: &UnitVec, level: u8) -> Result<HtmId> {
    check_level(level)?;
    check_unit(p)?;
    let r = pick(&ROOTS, p);
    let mut id = 8 + r as u32;
    let mut tri = ROOTS[r];
    for _ in 0..level {
        let kids = subdivide(&tri);
        let k = pick(&kids, p);
        id = (id << 2) | k as u32;
        tri = kids[k];
    }
    Ok(HtmId(id))
}

/// Corners of trixel `t`.
pub fn trixel_corners(t: HtmId) -> [UnitVec; 3] {
    let level = t.level();
    let root = (t.0 >> (2 * level as u32)) - 8;
    let mut tri = ROOTS[root as usize];
    for step in (0..level).rev() {
        let k = (t.0 >> (2 * step as u32)) & 3;
        tri = subdivide(&tri)[k as usize];
    }
    tri
}

/// A cap enclosing a trixel: centered on the normalized corner sum, radius
/// reaching the farthest corner.
fn bounding_cap(t: &Tri) -> (UnitVec, f64) {
    let c = t[0].add(&t[1]).add(&t[2]).scaled_unit();
    let r = t.iter().map(|v| c.angle_to(v)).fold(0.0, f64::max);
    (c, r)
}

#[derive(Clone, Copy, PartialEq)]
enum CapTest {
    Miss,
    Partial,
    Inside,
}

fn classify(center: &UnitVec, radius: f64, t: &Tri) -> CapTest {
    let (c, r) = bounding_cap(t);
    let d = center.angle_to(&c);
    if d > radius + r + COVER_SLACK {
        CapTest::Miss
    } else if d + r <= radius {
        CapTest::Inside
    } else {
        CapTest::Partial
    }
}

fn check_cap(center: &UnitVec, radius: f64, level: u8) -> Result<()> {
    check_level(level)?;
    check_unit(center)?;
    if !(0.0..=PI).contains(&radius) {
        return Err(Error::InvalidInput(format!(
            "radius {radius} outside [0, pi]"
        )));
    }
    Ok(())
}

/// Sorted, disjoint, non-adjacent ranges at `level` covering every trixel
/// that intersects the spherical cap. The cover is conservative: a trixel is
/// dropped only when the cap misses its bounding cap.
pub fn cover_circle(center: &UnitVec, radius: f64, level: u8) -> Result<Vec<HtmRange>> {
    check_cap(center, radius, level)?;
    if radius == 0.0 {
        return Ok(vec![HtmRange::single(point_to_htm(center, level)?)]);
    }
    let mut out: Vec<HtmRange> = Vec::new();
    for (r, tri) in ROOTS.iter().enumerate() {
        collect(center, radius, HtmId(8 + r as u32), tri, level, &mut out);
    }
    Ok(out)
}

fn push_merged(out: &mut Vec<HtmRange>, r: HtmRange) {
    if let Some(last) = out.last_mut() {
        if last.hi.0 + 1 == r.lo.0 {
            last.hi = r.hi;
            return;
        }
    }
    out.push(r);
}

fn collect(center: &UnitVec, radius: f64, id: HtmId, tri: &Tri, level: u8, out: &mut Vec<HtmRange>) {
    match classify(center, radius, tri) {
        CapTest::Miss => {}
        CapTest::Inside => push_merged(out, id.descendants_at(level)),
        CapTest::Partial if id.level() == level => push_merged(out, HtmRange::single(id)),
        CapTest::Partial => {
            let kids = subdivide(tri);
            for (k, kid) in kids.iter().enumerate() {
                collect(center, radius, HtmId((id.0 << 2) | k as u32), kid, level, out);
            }
        }
    }
}

/// `[first, last]` of [`cover_circle`] without materializing the cover.
///
/// Used to give a probe object its single bounding id range; at level 14 a
/// cap of a few arcseconds spans dozens of trixels, so walking only the two
/// extreme paths is much cheaper than listing them.
pub fn cover_envelope(center: &UnitVec, radius: f64, level: u8) -> Result<HtmRange> {
    check_cap(center, radius, level)?;
    if radius == 0.0 {
        return Ok(HtmRange::single(point_to_htm(center, level)?));
    }
    let lo = extreme_leaf(center, radius, level, false);
    let hi = extreme_leaf(center, radius, level, true);
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(HtmRange { lo, hi }),
        _ => Err(Error::Invariant("cap covers no trixel".into())),
    }
}

fn extreme_leaf(center: &UnitVec, radius: f64, level: u8, last: bool) -> Option<HtmId> {
    let order: [usize; 8] = if last {
        [7, 6, 5, 4, 3, 2, 1, 0]
    } else {
        [0, 1, 2, 3, 4, 5, 6, 7]
    };
    order
        .iter()
        .find_map(|&r| extreme_in(center, radius, HtmId(8 + r as u32), &ROOTS[r], level, last))
}

fn extreme_in(center: &UnitVec, radius: f64, id: HtmId, tri: &Tri, level: u8, last: bool) -> Option<HtmId> {
    match classify(center, radius, tri) {
        CapTest::Miss => None,
        CapTest::Inside => {
            let span = id.descendants_at(level);
            Some(if last { span.hi } else { span.lo })
        }
        CapTest::Partial if id.level() == level => Some(id),
        CapTest::Partial => {
            let kids = subdivide(tri);
            let order: [usize; 4] = if last { [3, 2, 1, 0] } else { [0, 1, 2, 3] };
            order.iter().find_map(|&k| {
                extreme_in(center, radius, HtmId((id.0 << 2) | k as u32), &kids[k], level, last)
            })
        }
    }
}
