//! CSV tables: observations, ground-truth positions and ground-truth labels.
//!
//! Times are 1-based in files and 0-based in memory.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Association, GroundTruth, ObservationSet};

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Checks a header of the form `first,second,y1..yD` and returns D.
fn coordinate_header(headers: &csv::StringRecord, first: &str, second: &str) -> Result<usize> {
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != first || cols[1] != second {
        return Err(parse_err(1, format!("header must be `{first},{second},y1,...,yD`")));
    }
    for (i, c) in cols[2..].iter().enumerate() {
        if *c != format!("y{}", i + 1) {
            return Err(parse_err(1, format!("unexpected column `{c}`, expected `y{}`", i + 1)));
        }
    }
    Ok(cols.len() - 2)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = record_line(rec);
    let raw = rec.get(i).ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{name}` from `{raw}`")))
}

fn time_field(rec: &csv::StringRecord) -> Result<usize> {
    let t: usize = field(rec, 0, "t")?;
    if t == 0 {
        return Err(parse_err(record_line(rec), "t is 1-based"));
    }
    Ok(t - 1)
}

fn coordinates(rec: &csv::StringRecord, dim: usize) -> Result<DVector<f64>> {
    let line = record_line(rec);
    if rec.len() != dim + 2 {
        return Err(parse_err(line, format!("expected {} columns, found {}", dim + 2, rec.len())));
    }
    let mut y = DVector::zeros(dim);
    for d in 0..dim {
        let v: f64 = field(rec, d + 2, &format!("y{}", d + 1))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("y{} is not finite", d + 1)));
        }
        y[d] = v;
    }
    Ok(y)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).from_reader(r)
}

/// Parses `t,n,y1..yD`. Rows must be ordered by time, and the indices
/// within each time must be exactly `0..N_t`.
pub fn read_observations<R: Read>(r: R) -> Result<ObservationSet> {
    let mut rdr = reader(r);
    let dim = coordinate_header(rdr.headers()?, "t", "n")?;
    let mut frames: Vec<Vec<Option<DVector<f64>>>> = Vec::new();
    let mut last_t = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let t = time_field(&rec)?;
        let n: usize = field(&rec, 1, "n")?;
        let y = coordinates(&rec, dim)?;
        if t < last_t {
            return Err(parse_err(line, format!("t={} appears after t={}", t + 1, last_t + 1)));
        }
        last_t = t;
        if frames.len() <= t {
            frames.resize(t + 1, Vec::new());
        }
        let frame = &mut frames[t];
        if frame.len() <= n {
            frame.resize(n + 1, None);
        }
        if frame[n].is_some() {
            return Err(parse_err(line, format!("duplicate observation (t={}, n={n})", t + 1)));
        }
        frame[n] = Some(y);
    }
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(t, f)| {
            f.into_iter()
                .enumerate()
                .map(|(n, y)| {
                    y.ok_or_else(|| {
                        Error::Inconsistent(format!("observation (t={}, n={n}) is missing", t + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(dim, frames)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    read_observations(File::open(path)?)
}

fn coordinate_headers(first: &str, second: &str, dim: usize) -> Vec<String> {
    let mut h = vec![first.to_string(), second.to_string()];
    h.extend((1..=dim).map(|d| format!("y{d}")));
    h
}

pub fn write_observations<W: Write>(w: W, obs: &ObservationSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(coordinate_headers("t", "n", obs.dim()))?;
    for (t, frame) in obs.frames().iter().enumerate() {
        for (n, y) in frame.iter().enumerate() {
            let mut row = vec![(t + 1).to_string(), n.to_string()];
            row.extend(y.iter().map(|v| v.to_string()));
            wtr.write_record(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_observations(path: impl AsRef<Path>, obs: &ObservationSet) -> Result<()> {
    write_observations(File::create(path)?, obs)
}

/// Parses `t,object_id,y1..yD` into per-time positions. Labels are not part
/// of this table; see [`read_labels`].
pub fn read_ground_truth<R: Read>(r: R) -> Result<GroundTruth> {
    let mut rdr = reader(r);
    let dim = coordinate_header(rdr.headers()?, "t", "object_id")?;
    let mut frames: Vec<Vec<(usize, DVector<f64>)>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let t = time_field(&rec)?;
        let id: usize = field(&rec, 1, "object_id")?;
        let y = coordinates(&rec, dim)?;
        if frames.len() <= t {
            frames.resize(t + 1, Vec::new());
        }
        if frames[t].iter().any(|(k, _)| *k == id) {
            return Err(parse_err(line, format!("object {id} listed twice at t={}", t + 1)));
        }
        frames[t].push((id, y));
    }
    for f in &mut frames {
        f.sort_by_key(|(id, _)| *id);
    }
    Ok(GroundTruth { frames, labels: None })
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    read_ground_truth(File::open(path)?)
}

pub fn write_ground_truth<W: Write>(w: W, truth: &GroundTruth) -> Result<()> {
    let dim = truth
        .frames
        .iter()
        .flatten()
        .map(|(_, y)| y.len())
        .next()
        .unwrap_or(1);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(coordinate_headers("t", "object_id", dim))?;
    for (t, frame) in truth.frames.iter().enumerate() {
        for (id, y) in frame {
            let mut row = vec![(t + 1).to_string(), id.to_string()];
            row.extend(y.iter().map(|v| v.to_string()));
            wtr.write_record(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_ground_truth(path: impl AsRef<Path>, truth: &GroundTruth) -> Result<()> {
    write_ground_truth(File::create(path)?, truth)
}

/// Parses `t,n,object_id` (0 = clutter) against the observation layout.
pub fn read_labels<R: Read>(r: R, obs: &ObservationSet) -> Result<Association> {
    let mut rdr = reader(r);
    let cols: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if cols != ["t", "n", "object_id"] {
        return Err(parse_err(1, "header must be `t,n,object_id`"));
    }
    let mut labels: Vec<Vec<Option<usize>>> = obs.counts().iter().map(|&n| vec![None; n]).collect();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let t = time_field(&rec)?;
        let n: usize = field(&rec, 1, "n")?;
        let k: usize = field(&rec, 2, "object_id")?;
        let slot = labels
            .get_mut(t)
            .and_then(|f| f.get_mut(n))
            .ok_or_else(|| parse_err(line, format!("no observation (t={}, n={n})", t + 1)))?;
        if slot.replace(k).is_some() {
            return Err(parse_err(line, format!("duplicate label for (t={}, n={n})", t + 1)));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(t, f)| {
            f.into_iter()
                .enumerate()
                .map(|(n, k)| {
                    k.ok_or_else(|| Error::Inconsistent(format!("no label for (t={}, n={n})", t + 1)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Association::new(labels))
}

pub fn load_labels(path: impl AsRef<Path>, obs: &ObservationSet) -> Result<Association> {
    read_labels(File::open(path)?, obs)
}

pub fn write_labels<W: Write>(w: W, z: &Association) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "n", "object_id"])?;
    for (t, frame) in z.labels().iter().enumerate() {
        for (n, k) in frame.iter().enumerate() {
            wtr.write_record([(t + 1).to_string(), n.to_string(), k.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_labels(path: impl AsRef<Path>, z: &Association) -> Result<()> {
    write_labels(File::create(path)?, z)
}
