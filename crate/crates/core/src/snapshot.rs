//! Plain-text field snapshots.
//!
//! ```text
//! BSCH-FIELD v1 nx=<nx> ny=<ny> lx=<lx> ly=<ly>
//! <ny lines of nx values, row j = 0 first>
//! ```
//!
//! Surface snapshots use `ny=ring` and carry two lines (bottom, top). Values
//! are written with 17 significant digits and read back bit-exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{BulkField, Grid, SurfField};

const MAGIC: &str = "BSCH-FIELD";
const VERSION: &str = "v1";

/// Header fields of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    /// `None` for a surface snapshot.
    pub ny: Option<usize>,
    pub lx: f64,
    pub ly: f64,
}

fn fmt_value(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn write_rows<'a>(out: &mut String, rows: impl Iterator<Item = &'a [f64]>) {
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            fmt_value(out, *v);
        }
        out.push('\n');
    }
}

pub fn write_bulk(g: &Grid, u: &BulkField) -> Result<String> {
    g.check_bulk(u)?;
    let mut out = format!(
        "{MAGIC} {VERSION} nx={} ny={} lx={:?} ly={:?}\n",
        g.nx(),
        g.ny(),
        g.lx(),
        g.ly()
    );
    write_rows(&mut out, (0..g.ny()).map(|j| u.row(j)));
    Ok(out)
}

pub fn write_surface(g: &Grid, v: &SurfField) -> Result<String> {
    g.check_surf(v)?;
    let mut out = format!(
        "{MAGIC} {VERSION} nx={} ny=ring lx={:?} ly={:?}\n",
        g.nx(),
        g.lx(),
        g.ly()
    );
    let nx = g.nx();
    write_rows(
        &mut out,
        [&v.as_slice()[..nx], &v.as_slice()[nx..]].into_iter(),
    );
    Ok(out)
}

fn parse_header(line: &str) -> Result<SnapshotHeader> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format(format!("line 1: expected {MAGIC} magic")));
    }
    if parts.next() != Some(VERSION) {
        return Err(Error::Format(format!("line 1: expected version {VERSION}")));
    }
    let mut nx = None;
    let mut ny = None;
    let mut lx = None;
    let mut ly = None;
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line 1: malformed header token `{kv}`")))?;
        let bad = || Error::Format(format!("line 1: bad value for `{k}`: `{v}`"));
        match k {
            "nx" => nx = Some(v.parse::<usize>().map_err(|_| bad())?),
            "ny" => {
                ny = Some(if v == "ring" {
                    None
                } else {
                    Some(v.parse::<usize>().map_err(|_| bad())?)
                })
            }
            "lx" => lx = Some(v.parse::<f64>().map_err(|_| bad())?),
            "ly" => ly = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(Error::Format(format!("line 1: unknown header key `{k}`"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("line 1: missing `{k}`"));
    Ok(SnapshotHeader {
        nx: nx.ok_or_else(|| missing("nx"))?,
        ny: ny.ok_or_else(|| missing("ny"))?,
        lx: lx.ok_or_else(|| missing("lx"))?,
        ly: ly.ok_or_else(|| missing("ly"))?,
    })
}

fn parse_rows(text: &str, rows: usize, cols: usize) -> Result<(SnapshotHeader, Vec<f64>)> {
    let mut lines = text.lines();
    let header = parse_header(
        lines
            .next()
            .ok_or_else(|| Error::Format("empty snapshot".into()))?,
    )?;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("expected {rows} data lines, found {r}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number `{tok}`", r + 2)))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Format(format!(
                "line {}: expected {cols} values, found {}",
                r + 2,
                data.len() - before
            )));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Format("trailing data after the last row".into()));
    }
    Ok((header, data))
}

pub fn read_bulk(text: &str) -> Result<(SnapshotHeader, BulkField)> {
    let first = text.lines().next().unwrap_or_default();
    let h = parse_header(first)?;
    let ny =
        h.ny.ok_or_else(|| Error::Format("expected a bulk snapshot, found a surface one".into()))?;
    let (h, data) = parse_rows(text, ny, h.nx)?;
    Ok((h, BulkField::from_vec(h.nx, ny, data)?))
}

pub fn read_surface(text: &str) -> Result<(SnapshotHeader, SurfField)> {
    let first = text.lines().next().unwrap_or_default();
    let h = parse_header(first)?;
    if h.ny.is_some() {
        return Err(Error::Format(
            "expected a surface snapshot, found a bulk one".into(),
        ));
    }
    let (h, data) = parse_rows(text, 2, h.nx)?;
    Ok((h, SurfField::from_vec(h.nx, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_line() {
        let g = Grid::new(8, 4, 2.0, 1.5).unwrap();
        let text = write_bulk(&g, &g.bulk_zeros()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "BSCH-FIELD v1 nx=8 ny=4 lx=2.0 ly=1.5"
        );
        assert_eq!(text.lines().count(), 5);
        let text = write_surface(&g, &g.surf_zeros()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "BSCH-FIELD v1 nx=8 ny=ring lx=2.0 ly=1.5"
        );
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn awkward_values_round_trip() {
        let g = Grid::new(8, 4, 1.0, 1.0).unwrap();
        let vals = [
            0.1,
            -1.0 / 3.0,
            1e-300,
            f64::MIN_POSITIVE,
            0.9999999999999999,
            -0.0,
            5e-324,
            123456.789,
        ];
        let u = g.bulk_from_fn(|x, y| vals[((x * 8.0 + y * 3.0) as usize) % vals.len()]);
        let (_, back) = read_bulk(&write_bulk(&g, &u).unwrap()).unwrap();
        for (a, b) in u.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_bulk("").is_err());
        assert!(read_bulk("BSCH-FIELD v2 nx=8 ny=4 lx=1 ly=1").is_err());
        assert!(read_bulk("BSCH-FIELD v1 nx=2 ny=1 lx=1 ly=1\n1 2 3\n").is_err());
        assert!(read_bulk("BSCH-FIELD v1 nx=2 ny=1 lx=1 ly=1\n1 x\n").is_err());
        assert!(read_surface("BSCH-FIELD v1 nx=2 ny=1 lx=1 ly=1\n1 2\n").is_err());
        assert!(read_surface("BSCH-FIELD v1 nx=2 ny=ring lx=1 ly=1\n1 2\n3 4\n").is_ok());
    }
}
