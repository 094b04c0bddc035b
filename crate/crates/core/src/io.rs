//! CSV tables. Floats are written with 17 significant digits so that every
//! table reads back bit-for-bit.

use crate::error::{Error, Result};
use crate::landscape::{LandscapeGrid, NodeStatus};
use crate::saddles::{Saddle, SaddleKind};
use crate::tracking::{EventKind, TrackEvent};
use num_complex::Complex64;
use std::io::{Read, Write};

type C64 = Complex64;

pub const LANDSCAPE_HEADER: &[&str] = &["re_ctrl", "im_ctrl", "re_x1", "im_x1", "status"];
pub const SADDLE_HEADER: &[&str] = &[
    "x1",
    "kind",
    "re_ctrl",
    "im_ctrl",
    "re_S",
    "im_S",
    "crossings",
    "relevant",
];
pub const TRACK_HEADER: &[&str] = &[
    "x1",
    "re_ctrl",
    "im_ctrl",
    "re_S",
    "im_S",
    "crossings",
    "relevant",
    "event",
];
pub const EXACT_HEADER: &[&str] = &["x1", "re_K", "im_K", "abs_K"];
pub const COMPARE_HEADER: &[&str] = &[
    "x1",
    "abs_exact",
    "abs_real_only",
    "abs_bvp_complex",
    "abs_continued",
    "events",
];
pub const PATH_HEADER: &[&str] = &["lambda", "re_x", "im_x"];
pub const CHAIN_HEADER: &[&str] = &["j", "re_y", "im_y"];
pub const POLYLINE_HEADER: &[&str] = &["id", "re_ctrl", "im_ctrl"];
pub const EVENT_HEADER: &[&str] = &["kind", "x1", "lo", "hi", "re_ctrl", "im_ctrl", "direction"];

/// Shortest text that keeps 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn records<R: Read>(r: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let got = rdr.headers().map_err(csv_err)?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Csv(format!(
            "expected header {}, found {}",
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.records().map(|r| r.map_err(csv_err)).collect()
}

fn field(rec: &csv::StringRecord, k: usize) -> Result<&str> {
    rec.get(k)
        .ok_or_else(|| Error::Csv(format!("missing column {k}")))
}

fn float(rec: &csv::StringRecord, k: usize) -> Result<f64> {
    let s = field(rec, k)?;
    s.parse()
        .map_err(|_| Error::Csv(format!("bad number {s:?} in column {k}")))
}

fn opt_float(rec: &csv::StringRecord, k: usize) -> Result<Option<f64>> {
    if field(rec, k)?.is_empty() {
        Ok(None)
    } else {
        float(rec, k).map(Some)
    }
}

fn complex(rec: &csv::StringRecord, k: usize) -> Result<C64> {
    Ok(C64::new(float(rec, k)?, float(rec, k + 1)?))
}

fn integer<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize) -> Result<T> {
    let s = field(rec, k)?;
    s.parse()
        .map_err(|_| Error::Csv(format!("bad integer {s:?} in column {k}")))
}

fn boolean(rec: &csv::StringRecord, k: usize) -> Result<bool> {
    match field(rec, k)? {
        "true" => Ok(true),
        "false" => Ok(false),
        s => Err(Error::Csv(format!("bad flag {s:?}"))),
    }
}

fn events(s: &str) -> Result<Vec<EventKind>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|e| EventKind::parse(e).ok_or_else(|| Error::Csv(format!("unknown event {e:?}"))))
        .collect()
}

fn join_events(ev: &[EventKind]) -> String {
    ev.iter().map(|e| e.name()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeRow {
    pub ctrl: C64,
    /// NaN for failed nodes.
    pub value: C64,
    pub status: NodeStatus,
}

pub fn write_landscape<W: Write>(w: W, grid: &LandscapeGrid) -> Result<()> {
    let mut out = writer(w, LANDSCAPE_HEADER)?;
    let s = &grid.spec;
    for j in 0..s.n_im {
        for i in 0..s.n_re {
            let (c, k) = (s.node(i, j), s.index(i, j));
            let v = grid.values[k];
            out.write_record([
                fmt_f64(c.re),
                fmt_f64(c.im),
                fmt_f64(v.re),
                fmt_f64(v.im),
                grid.status[k].name().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush().map_err(csv_err)
}

pub fn read_landscape<R: Read>(r: R) -> Result<Vec<LandscapeRow>> {
    records(r, LANDSCAPE_HEADER)?
        .iter()
        .map(|rec| {
            let status = NodeStatus::parse(field(rec, 4)?)
                .ok_or_else(|| Error::Csv("unknown node status".into()))?;
            Ok(LandscapeRow {
                ctrl: complex(rec, 0)?,
                value: complex(rec, 2)?,
                status,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleRow {
    pub x1: f64,
    pub kind: SaddleKind,
    pub ctrl: C64,
    pub action: C64,
    pub crossings: i32,
    pub relevant: bool,
}

impl From<&Saddle> for SaddleRow {
    fn from(s: &Saddle) -> Self {
        Self {
            x1: s.x1,
            kind: s.kind,
            ctrl: s.ctrl.value(),
            action: s.action,
            crossings: s.branch.crossing_count,
            relevant: s.relevant,
        }
    }
}

pub fn write_saddles<W: Write>(w: W, rows: &[SaddleRow]) -> Result<()> {
    let mut out = writer(w, SADDLE_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.x1),
            r.kind.name().to_string(),
            fmt_f64(r.ctrl.re),
            fmt_f64(r.ctrl.im),
            fmt_f64(r.action.re),
            fmt_f64(r.action.im),
            r.crossings.to_string(),
            r.relevant.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_saddles<R: Read>(r: R) -> Result<Vec<SaddleRow>> {
    records(r, SADDLE_HEADER)?
        .iter()
        .map(|rec| {
            let kind = SaddleKind::parse(field(rec, 1)?)
                .ok_or_else(|| Error::Csv("unknown saddle kind".into()))?;
            Ok(SaddleRow {
                x1: float(rec, 0)?,
                kind,
                ctrl: complex(rec, 2)?,
                action: complex(rec, 4)?,
                crossings: integer(rec, 6)?,
                relevant: boolean(rec, 7)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub x1: f64,
    pub ctrl: C64,
    pub action: C64,
    pub crossings: i32,
    pub relevant: bool,
    /// Events located in the step that ended at this row.
    pub events: Vec<EventKind>,
}

pub fn write_track<W: Write>(w: W, rows: &[TrackRow]) -> Result<()> {
    let mut out = writer(w, TRACK_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.x1),
            fmt_f64(r.ctrl.re),
            fmt_f64(r.ctrl.im),
            fmt_f64(r.action.re),
            fmt_f64(r.action.im),
            r.crossings.to_string(),
            r.relevant.to_string(),
            join_events(&r.events),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_track<R: Read>(r: R) -> Result<Vec<TrackRow>> {
    records(r, TRACK_HEADER)?
        .iter()
        .map(|rec| {
            Ok(TrackRow {
                x1: float(rec, 0)?,
                ctrl: complex(rec, 1)?,
                action: complex(rec, 3)?,
                crossings: integer(rec, 5)?,
                relevant: boolean(rec, 6)?,
                events: events(field(rec, 7)?)?,
            })
        })
        .collect()
}

pub fn write_exact<W: Write>(w: W, rows: &[(f64, C64)]) -> Result<()> {
    let mut out = writer(w, EXACT_HEADER)?;
    for (x1, k) in rows {
        out.write_record([
            fmt_f64(*x1),
            fmt_f64(k.re),
            fmt_f64(k.im),
            fmt_f64(k.norm()),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_exact<R: Read>(r: R) -> Result<Vec<(f64, C64)>> {
    records(r, EXACT_HEADER)?
        .iter()
        .map(|rec| Ok((float(rec, 0)?, complex(rec, 1)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub x1: f64,
    pub abs_exact: f64,
    pub abs_real_only: Option<f64>,
    pub abs_bvp_complex: Option<f64>,
    pub abs_continued: Option<f64>,
    pub events: Vec<EventKind>,
}

pub fn write_compare<W: Write>(w: W, rows: &[CompareRow]) -> Result<()> {
    let mut out = writer(w, COMPARE_HEADER)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        out.write_record([
            fmt_f64(r.x1),
            fmt_f64(r.abs_exact),
            opt(r.abs_real_only),
            opt(r.abs_bvp_complex),
            opt(r.abs_continued),
            join_events(&r.events),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_compare<R: Read>(r: R) -> Result<Vec<CompareRow>> {
    records(r, COMPARE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(CompareRow {
                x1: float(rec, 0)?,
                abs_exact: float(rec, 1)?,
                abs_real_only: opt_float(rec, 2)?,
                abs_bvp_complex: opt_float(rec, 3)?,
                abs_continued: opt_float(rec, 4)?,
                events: events(field(rec, 5)?)?,
            })
        })
        .collect()
}

/// Rows of (parameter, complex value): path dumps and discrete chains.
fn write_pairs<W: Write>(
    w: W,
    header: &[&str],
    rows: impl Iterator<Item = (String, C64)>,
) -> Result<()> {
    let mut out = writer(w, header)?;
    for (t, z) in rows {
        out.write_record([t, fmt_f64(z.re), fmt_f64(z.im)])
            .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn write_path<W: Write>(w: W, rows: &[(f64, C64)]) -> Result<()> {
    write_pairs(w, PATH_HEADER, rows.iter().map(|(l, x)| (fmt_f64(*l), *x)))
}

pub fn read_path<R: Read>(r: R) -> Result<Vec<(f64, C64)>> {
    records(r, PATH_HEADER)?
        .iter()
        .map(|rec| Ok((float(rec, 0)?, complex(rec, 1)?)))
        .collect()
}

pub fn write_chain<W: Write>(w: W, points: &[C64]) -> Result<()> {
    write_pairs(
        w,
        CHAIN_HEADER,
        points.iter().enumerate().map(|(j, y)| (j.to_string(), *y)),
    )
}

pub fn read_chain<R: Read>(r: R) -> Result<Vec<C64>> {
    let recs = records(r, CHAIN_HEADER)?;
    let mut out = Vec::with_capacity(recs.len());
    for (k, rec) in recs.iter().enumerate() {
        if integer::<usize>(rec, 0)? != k {
            return Err(Error::Csv(format!("chain index out of order at row {k}")));
        }
        out.push(complex(rec, 1)?);
    }
    Ok(out)
}

/// Level curves or cut chains, one polyline per id.
pub fn write_polylines<W: Write>(w: W, lines: &[Vec<C64>]) -> Result<()> {
    let mut out = writer(w, POLYLINE_HEADER)?;
    for (id, line) in lines.iter().enumerate() {
        for z in line {
            out.write_record([id.to_string(), fmt_f64(z.re), fmt_f64(z.im)])
                .map_err(csv_err)?;
        }
    }
    out.flush().map_err(csv_err)
}

pub fn read_polylines<R: Read>(r: R) -> Result<Vec<Vec<C64>>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for rec in records(r, POLYLINE_HEADER)? {
        let id: usize = integer(&rec, 0)?;
        if id == out.len() {
            out.push(Vec::new());
        } else if id + 1 != out.len() {
            return Err(Error::Csv(format!("polyline id {id} out of order")));
        }
        out[id].push(complex(&rec, 1)?);
    }
    Ok(out)
}

pub fn write_events<W: Write>(w: W, events: &[TrackEvent]) -> Result<()> {
    let mut out = writer(w, EVENT_HEADER)?;
    for e in events {
        out.write_record([
            e.kind.name().to_string(),
            fmt_f64(e.x1),
            fmt_f64(e.bracket.0),
            fmt_f64(e.bracket.1),
            fmt_f64(e.ctrl.re),
            fmt_f64(e.ctrl.im),
            e.direction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_events<R: Read>(r: R) -> Result<Vec<TrackEvent>> {
    records(r, EVENT_HEADER)?
        .iter()
        .map(|rec| {
            let kind = EventKind::parse(field(rec, 0)?)
                .ok_or_else(|| Error::Csv("unknown event".into()))?;
            Ok(TrackEvent {
                kind,
                x1: float(rec, 1)?,
                bracket: (float(rec, 2)?, float(rec, 3)?),
                ctrl: complex(rec, 4)?,
                direction: integer(rec, 6)?,
            })
        })
        .collect()
}

/// Free-form table with a fixed header; cells are written verbatim.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = writer(w, header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Csv(format!(
                "row has {} cells, header {}",
                r.len(),
                header.len()
            )));
        }
        out.write_record(r).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_table<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<String>>> {
    Ok(records(r, header)?
        .iter()
        .map(|rec| rec.iter().map(str::to_string).collect())
        .collect())
}
