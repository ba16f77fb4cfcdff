use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Address of one observation: time (0-based) and index within that time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsRef {
    pub t: usize,
    pub n: usize,
}

impl ObsRef {
    pub fn new(t: usize, n: usize) -> Self {
        Self { t, n }
    }
}

/// All observations, grouped by time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    dim: usize,
    frames: Vec<Vec<DVector<f64>>>,
}

impl ObservationSet {
    pub fn new(dim: usize, frames: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        for (t, frame) in frames.iter().enumerate() {
            for (n, y) in frame.iter().enumerate() {
                if y.len() != dim {
                    return Err(Error::Dimension(format!(
                        "observation ({t}, {n}) has dimension {}, expected {dim}",
                        y.len()
                    )));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter(format!("observation ({t}, {n}) is not finite")));
                }
            }
        }
        Ok(Self { dim, frames })
    }

    /// Scalar observations, one inner list per time step.
    pub fn from_scalars(frames: &[&[f64]]) -> Self {
        let frames = frames
            .iter()
            .map(|f| f.iter().map(|&v| DVector::from_element(1, v)).collect())
            .collect();
        Self { dim: 1, frames }
    }

    pub fn horizon(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self, t: usize) -> usize {
        self.frames[t].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.frames.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn get(&self, at: ObsRef) -> &DVector<f64> {
        &self.frames[at.t][at.n]
    }

    pub fn frame(&self, t: usize) -> &[DVector<f64>] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<DVector<f64>>] {
        &self.frames
    }

    pub fn contains(&self, at: ObsRef) -> bool {
        at.t < self.frames.len() && at.n < self.frames[at.t].len()
    }

    pub fn refs(&self) -> impl Iterator<Item = ObsRef> + '_ {
        self.frames
            .iter()
            .enumerate()
            .flat_map(|(t, f)| (0..f.len()).map(move |n| ObsRef::new(t, n)))
    }
}

/// Per-observation labels; 0 is clutter and `k > 0` is object `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Association {
    labels: Vec<Vec<usize>>,
}

impl Association {
    pub fn new(labels: Vec<Vec<usize>>) -> Self {
        Self { labels }
    }

    pub fn all_clutter(counts: &[usize]) -> Self {
        Self {
            labels: counts.iter().map(|&n| vec![0; n]).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, at: ObsRef) -> usize {
        self.labels[at.t][at.n]
    }

    pub fn set(&mut self, at: ObsRef, k: usize) {
        self.labels[at.t][at.n] = k;
    }

    pub fn frame(&self, t: usize) -> &[usize] {
        &self.labels[t]
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn num_objects(&self) -> usize {
        self.labels.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Whether the two observations are claimed by the same object.
    pub fn same_object(&self, a: ObsRef, b: ObsRef) -> bool {
        let k = self.get(a);
        k > 0 && k == self.get(b)
    }

    /// Apply `relabel[k]` to every object label (index 0 must map to 0).
    pub fn relabeled(&self, relabel: &[usize]) -> Self {
        Self {
            labels: self
                .labels
                .iter()
                .map(|f| f.iter().map(|&k| relabel[k]).collect())
                .collect(),
        }
    }
}

/// One object's stored states at the times it claims an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub times: Vec<usize>,
    pub obs: Vec<usize>,
    pub states: Vec<DVector<f64>>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn arrival(&self) -> usize {
        self.times[0]
    }

    pub fn departure(&self) -> usize {
        *self.times.last().expect("nonempty track")
    }

    pub fn claims(&self) -> impl Iterator<Item = ObsRef> + '_ {
        self.times.iter().zip(&self.obs).map(|(&t, &n)| ObsRef::new(t, n))
    }

    /// Index into `times` of the claim at `t`, if any.
    pub fn position(&self, t: usize) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }
}

/// Identity-preserving reference positions, plus (when known) the true
/// object of every observation (0 for clutter).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frames: Vec<Vec<(usize, DVector<f64>)>>,
    pub labels: Option<Association>,
}

impl GroundTruth {
    pub fn horizon(&self) -> usize {
        self.frames.len()
    }

    /// Distinct object ids in ascending order.
    pub fn object_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.frames.iter().flatten().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Whether both observations belong to the same true object, if labels are known.
    pub fn same_object(&self, design: &Design) -> Option<bool> {
        self.labels
            .as_ref()
            .map(|z| z.same_object(design.first, design.second))
    }
}

/// A pairwise query over two observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Design {
    pub first: ObsRef,
    pub second: ObsRef,
}

impl Design {
    /// Orders the pair so that `first < second`.
    pub fn new(a: ObsRef, b: ObsRef) -> Self {
        if a <= b {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Human,
    SimulatedOracle,
}

/// An answer to a design: `same = true` claims both observations share an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub design: Design,
    pub same: bool,
    pub reliability: f64,
    pub provenance: Provenance,
    pub round: usize,
}

impl Annotation {
    pub fn log_likelihood(&self, z: &Association) -> f64 {
        if z.same_object(self.design.first, self.design.second) == self.same {
            self.reliability.ln()
        } else {
            (1.0 - self.reliability).ln()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Arrivals,
    Clutter,
    Detections,
    Departures,
}

/// First violated constraint of an association hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateClaim { t: usize, k: usize },
    TooFewObservations { k: usize, count: usize },
    NonContiguousLabel { k: usize },
    HorizonMismatch { expected: usize, found: usize },
    CountMismatch { t: usize, kind: CountKind, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateClaim { t, k } => {
                write!(f, "object {k} claims more than one observation at t={}", t + 1)
            }
            Violation::TooFewObservations { k, count } => {
                write!(f, "object {k} has {count} observation(s), at least 2 required")
            }
            Violation::NonContiguousLabel { k } => write!(f, "object label {k} is unused"),
            Violation::HorizonMismatch { expected, found } => {
                write!(f, "horizon {found} does not match {expected}")
            }
            Violation::CountMismatch { t, kind, expected, found } => write!(
                f,
                "{kind:?} count at t={} is {found}, expected {expected}",
                t + 1
            ),
        }
    }
}
