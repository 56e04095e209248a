//! Plain-text query trace.
//!
//! ```text
//! # free-form header lines, e.g. `layout_hash=1a2b3c4d`
//! <query_id>,<arrival_ms>,<n_objects>[,<predicate>]
//! <x>,<y>,<z>,<radius_rad>        (n_objects rows)
//! ...
//! ```
//!
//! The predicate column is omitted for pass-through queries.

use std::io::{self, BufRead, Write};

use super::{MatchObject, Predicate, Query};
use crate::error::{Error, Result};
use crate::htm::UnitVec;
use crate::Micros;

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Header comment lines without the leading `#`.
    pub header: Vec<String>,
    pub queries: Vec<Query>,
}

impl Trace {
    /// Value of a `key=value` header line.
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find_map(|l| {
            l.trim()
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::trim)
        })
    }
}

/// Milliseconds with microsecond precision, e.g. `1213.000`.
pub fn format_ms(us: Micros) -> String {
    format!("{}.{:03}", us / 1000, us % 1000)
}

pub fn write_trace<W: Write>(mut w: W, queries: &[Query], header: &[String]) -> io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for q in queries {
        write!(w, "{},{},{}", q.id, format_ms(q.arrival_us), q.objects.len())?;
        if q.predicate != Predicate::All {
            write!(w, ",{}", q.predicate)?;
        }
        writeln!(w)?;
        for o in &q.objects {
            writeln!(w, "{},{},{},{}", o.pos.x, o.pos.y, o.pos.z, o.radius)?;
        }
    }
    w.flush()
}

fn bad(line_no: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("trace line {line_no}: {msg}"))
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Trace> {
    let mut header = Vec::new();
    let mut queries = Vec::new();
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((no, line)) = lines.next() {
        let line = line.map_err(|e| bad(no, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            header.push(c.trim().to_string());
            continue;
        }
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if !(3..=4).contains(&f.len()) {
            return Err(bad(no, format!("expected `query_id,arrival_ms,n_objects[,predicate]`, got `{t}`")));
        }
        let id = f[0].parse().map_err(|_| bad(no, format!("bad query id `{}`", f[0])))?;
        let arrival: f64 = f[1].parse().map_err(|_| bad(no, format!("bad arrival `{}`", f[1])))?;
        let n: usize = f[2].parse().map_err(|_| bad(no, format!("bad object count `{}`", f[2])))?;
        let predicate = match f.get(3) {
            Some(p) => p.parse()?,
            None => Predicate::All,
        };
        let mut objects = Vec::with_capacity(n);
        for _ in 0..n {
            let (ono, oline) = lines
                .next()
                .ok_or_else(|| bad(no, format!("query {id} truncated")))?;
            let oline = oline.map_err(|e| bad(ono, e))?;
            let v: Vec<f64> = oline
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(ono, e))?;
            if v.len() != 4 {
                return Err(bad(ono, "expected `x,y,z,radius_rad`"));
            }
            let pos = UnitVec::new(v[0], v[1], v[2]).map_err(|e| bad(ono, e))?;
            objects.push(MatchObject::new(pos, v[3]).map_err(|e| bad(ono, e))?);
        }
        queries.push(Query::new(id, arrival, objects, predicate).map_err(|e| bad(no, e))?);
    }
    Ok(Trace { header, queries })
}
