//! Line-delimited sample records and chain checkpoints (JSON).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Association, EventCounts, Track};
use crate::proposals::MoveKind;
use crate::sampler::{Checkpoint, SampleRecord};

#[derive(Debug, Serialize, Deserialize)]
struct ObjectLine {
    id: usize,
    /// 1-based.
    times: Vec<usize>,
    states: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleLine {
    iter: usize,
    chain: usize,
    logp: f64,
    #[serde(rename = "move")]
    kind: MoveKind,
    accepted: bool,
    z: Vec<Vec<usize>>,
    objects: Vec<ObjectLine>,
    counts: EventCounts,
}

fn object_line(id: usize, tr: &Track) -> ObjectLine {
    ObjectLine {
        id,
        times: tr.times.iter().map(|t| t + 1).collect(),
        states: tr.states.iter().map(|x| x.iter().copied().collect()).collect(),
    }
}

fn to_line(r: &SampleRecord) -> SampleLine {
    SampleLine {
        iter: r.iteration,
        chain: r.chain,
        logp: r.log_joint,
        kind: r.kind,
        accepted: r.accepted,
        z: r.z.labels().to_vec(),
        objects: r.tracks.iter().enumerate().map(|(i, tr)| object_line(i + 1, tr)).collect(),
        counts: r.counts.clone(),
    }
}

/// Rebuilds tracks, taking observation indices from `z`.
fn tracks_from_lines(objects: Vec<ObjectLine>, z: &Association, line: usize) -> Result<Vec<Track>> {
    let err = |m: String| Error::Parse { line, message: m };
    let mut tracks = Vec::with_capacity(objects.len());
    for (i, o) in objects.into_iter().enumerate() {
        if o.id != i + 1 {
            return Err(err(format!("object ids must be 1..K in order, found {}", o.id)));
        }
        if o.times.len() != o.states.len() {
            return Err(err(format!("object {} has {} times and {} states", o.id, o.times.len(), o.states.len())));
        }
        let mut times = Vec::with_capacity(o.times.len());
        let mut obs = Vec::with_capacity(o.times.len());
        for &t1 in &o.times {
            let t = t1
                .checked_sub(1)
                .filter(|&t| t < z.horizon())
                .ok_or_else(|| err(format!("object {} has time {t1} outside 1..={}", o.id, z.horizon())))?;
            let n = z
                .frame(t)
                .iter()
                .position(|&k| k == o.id)
                .ok_or_else(|| err(format!("object {} claims nothing at t={t1}", o.id)))?;
            times.push(t);
            obs.push(n);
        }
        tracks.push(Track {
            times,
            obs,
            states: o.states.into_iter().map(DVector::from_vec).collect(),
        });
    }
    Ok(tracks)
}

fn from_line(l: SampleLine, line: usize) -> Result<SampleRecord> {
    let z = Association::new(l.z);
    let tracks = tracks_from_lines(l.objects, &z, line)?;
    let claimed: usize = tracks.iter().map(Track::len).sum();
    let labelled = z.labels().iter().flatten().filter(|&&k| k > 0).count();
    if claimed != labelled {
        return Err(Error::Parse {
            line,
            message: format!("z labels {labelled} observations but objects claim {claimed}"),
        });
    }
    Ok(SampleRecord {
        iteration: l.iter,
        chain: l.chain,
        log_joint: l.logp,
        kind: l.kind,
        accepted: l.accepted,
        z,
        tracks,
        counts: l.counts,
    })
}

/// Streams records as JSON lines.
pub struct SampleWriter<W: Write> {
    inner: W,
}

impl SampleWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> SampleWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write(&mut self, record: &SampleRecord) -> Result<()> {
        serde_json::to_writer(&mut self.inner, &to_line(record))?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_samples<W: Write>(w: W, records: &[SampleRecord]) -> Result<()> {
    let mut sw = SampleWriter::new(w);
    for r in records {
        sw.write(r)?;
    }
    sw.finish()?;
    Ok(())
}

pub fn save_samples(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<()> {
    write_samples(BufWriter::new(File::create(path)?), records)
}

pub fn read_samples<R: Read>(r: R) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SampleLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(from_line(parsed, i + 1)?);
    }
    Ok(out)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    read_samples(File::open(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointObject {
    id: usize,
    times: Vec<usize>,
    obs: Vec<usize>,
    states: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    seed: u64,
    chain: usize,
    iteration: usize,
    objects: Vec<CheckpointObject>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, cp: &Checkpoint) -> Result<()> {
    let file = CheckpointFile {
        seed: cp.seed,
        chain: cp.chain,
        iteration: cp.iteration,
        objects: cp
            .tracks
            .iter()
            .enumerate()
            .map(|(i, tr)| CheckpointObject {
                id: i + 1,
                times: tr.times.iter().map(|t| t + 1).collect(),
                obs: tr.obs.clone(),
                states: tr.states.iter().map(|x| x.iter().copied().collect()).collect(),
            })
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let file: CheckpointFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let tracks = file
        .objects
        .into_iter()
        .map(|o| {
            if o.times.len() != o.obs.len() || o.times.len() != o.states.len() || o.times.contains(&0) {
                return Err(Error::Inconsistent(format!("checkpoint object {} is malformed", o.id)));
            }
            Ok(Track {
                times: o.times.iter().map(|t| t - 1).collect(),
                obs: o.obs,
                states: o.states.into_iter().map(DVector::from_vec).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        seed: file.seed,
        chain: file.chain,
        iteration: file.iteration,
        tracks,
    })
}
