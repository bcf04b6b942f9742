//! Snapshot and time-series files.
//!
//! A snapshot record is a text header followed by a little-endian f64
//! payload:
//!
//! ```text
//! NEMATIC-SNAPSHOT v1
//! dims 16 16 16
//! spacing 0.0625 0.0625 0.0625
//! domain periodic
//! time 0.0
//! fields d v dxq
//! # free-form provenance lines
//! payload 294912
//! <bytes>
//! ```
//!
//! Fields are stored one after another in the order listed, each as
//! three components per node in x-fastest node order. A trajectory file is a
//! concatenation of records with strictly increasing times.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DomainKind, Field, FieldError, Grid};
use crate::tensor::Vec3;

pub const SNAPSHOT_MAGIC: &str = "NEMATIC-SNAPSHOT v1";
pub const TIMESERIES_HEADER: &str = "t,F,kinetic,total,dxq_L2,symgrad_L2,E_rel,W,margin";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub time: f64,
    pub d: Field<Vec3>,
    pub v: Option<Field<Vec3>>,
    pub dxq: Option<Field<Vec3>>,
    pub provenance: Vec<String>,
}

impl Snapshot {
    pub fn new(time: f64, d: Field<Vec3>) -> Self {
        Snapshot { grid: d.grid, time, d, v: None, dxq: None, provenance: Vec::new() }
    }

    fn field_names(&self) -> Vec<&'static str> {
        let mut names = vec!["d"];
        if self.v.is_some() {
            names.push("v");
        }
        if self.dxq.is_some() {
            names.push("dxq");
        }
        names
    }

    /// Serializes one record.
    pub fn to_bytes(&self) -> Result<Vec<u8>, FieldError> {
        for f in [Some(&self.d), self.v.as_ref(), self.dxq.as_ref()].into_iter().flatten() {
            if f.grid != self.grid {
                return Err(FieldError::GridMismatch);
            }
        }
        let g = &self.grid;
        let mut out = String::new();
        out.push_str(SNAPSHOT_MAGIC);
        out.push('\n');
        out.push_str(&format!("dims {} {} {}\n", g.dims[0], g.dims[1], g.dims[2]));
        out.push_str(&format!("spacing {:?} {:?} {:?}\n", g.spacing[0], g.spacing[1], g.spacing[2]));
        out.push_str(&format!("domain {}\n", g.kind.as_str()));
        out.push_str(&format!("time {:?}\n", self.time));
        out.push_str(&format!("fields {}\n", self.field_names().join(" ")));
        for line in &self.provenance {
            for part in line.lines() {
                out.push_str("# ");
                out.push_str(part);
                out.push('\n');
            }
        }
        let fields: Vec<&Field<Vec3>> =
            [Some(&self.d), self.v.as_ref(), self.dxq.as_ref()].into_iter().flatten().collect();
        let nbytes = fields.len() * g.len() * 24;
        out.push_str(&format!("payload {nbytes}\n"));
        let mut bytes = out.into_bytes();
        bytes.reserve(nbytes);
        for f in fields {
            for v in &f.values {
                for x in v.0 {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(bytes)
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), FieldError> {
    fs::write(path, snap.to_bytes()?)?;
    Ok(())
}

/// Writes records back to back; times must increase strictly.
pub fn write_trajectory_file(path: &Path, snaps: &[Snapshot]) -> Result<(), FieldError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    let mut prev: Option<f64> = None;
    for s in snaps {
        if prev.is_some_and(|p| !(s.time > p)) {
            return Err(FieldError::Malformed { offset: 0, message: format!("time {} does not increase", s.time) });
        }
        prev = Some(s.time);
        f.write_all(&s.to_bytes()?)?;
    }
    f.flush()?;
    Ok(())
}

/// Reads the first record of a snapshot file.
pub fn read_snapshot(path: &Path) -> Result<Snapshot, FieldError> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    parse_record(&mut cur)
}

/// Reads every record of a trajectory file; times must increase strictly.
pub fn read_trajectory_file(path: &Path) -> Result<Vec<Snapshot>, FieldError> {
    let bytes = fs::read(path)?;
    parse_records(&bytes)
}

pub fn parse_records(bytes: &[u8]) -> Result<Vec<Snapshot>, FieldError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut out: Vec<Snapshot> = Vec::new();
    while cur.pos < bytes.len() {
        let start = cur.pos;
        let snap = parse_record(&mut cur)?;
        if let Some(prev) = out.last() {
            if !(snap.time > prev.time) {
                return Err(FieldError::Malformed {
                    offset: start,
                    message: format!("time {} does not increase past {}", snap.time, prev.time),
                });
            }
            if snap.grid != prev.grid {
                return Err(FieldError::Malformed { offset: start, message: "grid changes between records".into() });
            }
        }
        out.push(snap);
    }
    if out.is_empty() {
        return Err(FieldError::Malformed { offset: 0, message: format!("missing section `{SNAPSHOT_MAGIC}`") });
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn malformed(&self, message: impl Into<String>) -> FieldError {
        FieldError::Malformed { offset: self.pos, message: message.into() }
    }

    fn line(&mut self, section: &str) -> Result<&str, FieldError> {
        if self.pos >= self.bytes.len() {
            return Err(self.malformed(format!("missing section `{section}`")));
        }
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| self.malformed(format!("unterminated `{section}` line")))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| self.malformed(format!("`{section}` line is not UTF-8")))?;
        self.pos += end + 1;
        Ok(line)
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>, FieldError> {
        let start = self.pos;
        let line = self.line(key)?.to_string();
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(FieldError::Malformed { offset: start, message: format!("missing section `{key}`") });
        }
        Ok(parts.map(str::to_string).collect())
    }
}

fn parse_num<T: std::str::FromStr>(cur: &Cursor, key: &str, s: &str) -> Result<T, FieldError> {
    s.parse().map_err(|_| cur.malformed(format!("cannot parse `{s}` in `{key}`")))
}

fn parse_record(cur: &mut Cursor) -> Result<Snapshot, FieldError> {
    let start = cur.pos;
    let magic = cur.line(SNAPSHOT_MAGIC)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(FieldError::Malformed { offset: start, message: format!("missing section `{SNAPSHOT_MAGIC}`") });
    }
    let dims = cur.keyed("dims")?;
    if dims.len() != 3 {
        return Err(cur.malformed("`dims` needs three entries"));
    }
    let dims: [usize; 3] = [
        parse_num(cur, "dims", &dims[0])?,
        parse_num(cur, "dims", &dims[1])?,
        parse_num(cur, "dims", &dims[2])?,
    ];
    let sp = cur.keyed("spacing")?;
    if sp.len() != 3 {
        return Err(cur.malformed("`spacing` needs three entries"));
    }
    let spacing: [f64; 3] =
        [parse_num(cur, "spacing", &sp[0])?, parse_num(cur, "spacing", &sp[1])?, parse_num(cur, "spacing", &sp[2])?];
    let dom = cur.keyed("domain")?;
    let kind = dom
        .first()
        .and_then(|s| DomainKind::parse(s))
        .ok_or_else(|| cur.malformed("`domain` must be periodic or dirichlet"))?;
    let grid = Grid::new(dims, spacing, kind).map_err(|e| cur.malformed(e.to_string()))?;
    let t = cur.keyed("time")?;
    let time: f64 = parse_num(cur, "time", t.first().map(String::as_str).unwrap_or(""))?;
    let names = cur.keyed("fields")?;
    if names.first().map(String::as_str) != Some("d") {
        return Err(cur.malformed("`fields` must start with d"));
    }
    for n in &names {
        if !matches!(n.as_str(), "d" | "v" | "dxq") {
            return Err(cur.malformed(format!("unknown field `{n}`")));
        }
    }
    let mut provenance = Vec::new();
    let payload = loop {
        let pos = cur.pos;
        let line = cur.line("payload")?.to_string();
        if let Some(rest) = line.strip_prefix('#') {
            provenance.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("payload") {
            return Err(FieldError::Malformed { offset: pos, message: "missing section `payload`".into() });
        }
        let n: usize = parse_num(cur, "payload", parts.next().unwrap_or(""))?;
        break n;
    };
    let expected = names.len() * grid.len() * 24;
    if payload != expected {
        return Err(cur.malformed(format!(
            "payload length {payload} does not match dims {dims:?} with {} fields ({expected} bytes)",
            names.len()
        )));
    }
    let available = cur.bytes.len() - cur.pos;
    if available < payload {
        return Err(cur.malformed(format!("truncated payload: expected {payload} bytes, found {available}")));
    }
    let data = &cur.bytes[cur.pos..cur.pos + payload];
    cur.pos += payload;
    let mut fields = data.chunks_exact(grid.len() * 24).map(|chunk| {
        let values = chunk
            .chunks_exact(24)
            .map(|c| {
                let x = |k: usize| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().expect("8 bytes"));
                Vec3([x(0), x(1), x(2)])
            })
            .collect();
        Field { grid, values }
    });
    let mut snap = Snapshot { grid, time, d: fields.next().expect("d present"), v: None, dxq: None, provenance };
    for (name, f) in names.iter().skip(1).zip(fields) {
        match name.as_str() {
            "v" => snap.v = Some(f),
            _ => snap.dxq = Some(f),
        }
    }
    Ok(snap)
}

/// One row of the time-series file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub total: f64,
    pub dxq_norm: f64,
    pub sym_grad_norm: f64,
    pub e_rel: f64,
    pub w: f64,
    pub margin: f64,
}

impl TimeSeriesRow {
    pub fn columns(&self) -> [f64; 9] {
        [self.t, self.energy, self.kinetic, self.total, self.dxq_norm, self.sym_grad_norm, self.e_rel, self.w, self.margin]
    }
}

pub fn format_timeseries(provenance: &[String], rows: &[TimeSeriesRow]) -> String {
    let mut out = String::new();
    for line in provenance {
        for part in line.lines() {
            out.push_str("# ");
            out.push_str(part);
            out.push('\n');
        }
    }
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in rows {
        let cols: Vec<String> = r.columns().iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn write_timeseries(path: &Path, provenance: &[String], rows: &[TimeSeriesRow]) -> Result<(), FieldError> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_timeseries(provenance, rows).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_divfree_velocity, random_unit_director};

    fn sample() -> Snapshot {
        let g = Grid::cube(5, 1.3, DomainKind::Periodic).unwrap();
        let d = random_unit_director(&g, 1, 1.0).into_field();
        let v = random_divfree_velocity(&g, 2, 1.0).into_field();
        let mut s = Snapshot::new(0.1 + 0.2, d);
        s.v = Some(v);
        s.provenance = vec!["seed=1".into()];
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let bytes = s.to_bytes().unwrap();
        let back = parse_records(&bytes).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], s);
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = sample().to_bytes().unwrap();
        let err = parse_records(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
        let text_end = bytes.iter().position(|&b| b == b'#').unwrap();
        let err = parse_records(&bytes[..text_end]).unwrap_err();
        assert!(err.to_string().contains("missing section `payload`"), "{err}");
    }

    #[test]
    fn dims_mismatch_is_reported() {
        let bytes = sample().to_bytes().unwrap();
        let text = String::from_utf8_lossy(&bytes).replacen("dims 5 5 5", "dims 5 5 6", 1);
        let err = parse_records(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("does not match dims"), "{err}");
    }

    #[test]
    fn times_must_increase() {
        let s = sample();
        let mut bytes = s.to_bytes().unwrap();
        bytes.extend(s.to_bytes().unwrap());
        assert!(parse_records(&bytes).is_err());
    }
}
