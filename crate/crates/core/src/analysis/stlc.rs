//! Spatio-temporal linear-combine (STLC) trajectory cost.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, ObservationSet, Track};

/// Points of one object in observation space, at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<usize>,
    pub points: Vec<DVector<f64>>,
}

/// One association hypothesis seen as a set of trajectories.
pub type Hypothesis = Vec<Trajectory>;

impl Trajectory {
    pub fn new(times: Vec<usize>, points: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::Dimension(format!("{} times but {} points", times.len(), points.len())));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("trajectory times must increase".into()));
        }
        Ok(Self { times, points })
    }

    pub fn from_scalars(samples: &[(usize, f64)]) -> Self {
        Self {
            times: samples.iter().map(|s| s.0).collect(),
            points: samples.iter().map(|s| DVector::from_element(1, s.1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Position at `t` and its temporal distance to the support: linear
    /// interpolation inside, the nearest endpoint outside.
    fn aligned(&self, t: usize) -> (DVector<f64>, f64) {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return (self.points[0].clone(), (self.times[0] - t) as f64);
        }
        if t >= self.times[last] {
            return (self.points[last].clone(), (t - self.times[last]) as f64);
        }
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            return (self.points[i].clone(), 0.0);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) as f64 / (t1 - t0) as f64;
        (&self.points[i - 1] * (1.0 - w) + &self.points[i] * w, 0.0)
    }
}

/// Trajectories `H x` of a sample's tracks.
pub fn hypothesis_from_tracks(tracks: &[Track], observation: &DMatrix<f64>) -> Hypothesis {
    tracks
        .iter()
        .map(|tr| Trajectory {
            times: tr.times.clone(),
            points: tr.states.iter().map(|x| observation * x).collect(),
        })
        .collect()
}

/// Trajectories through the claimed observations themselves.
pub fn hypothesis_from_claims(tracks: &[Track], obs: &ObservationSet) -> Hypothesis {
    tracks
        .iter()
        .map(|tr| Trajectory {
            times: tr.times.clone(),
            points: tr.claims().map(|r| obs.get(r).clone()).collect(),
        })
        .collect()
}

/// One trajectory per ground-truth object id (ascending).
pub fn hypothesis_from_truth(truth: &GroundTruth) -> Hypothesis {
    truth
        .object_ids()
        .into_iter()
        .map(|id| {
            let (times, points) = truth
                .frames
                .iter()
                .enumerate()
                .filter_map(|(t, f)| f.iter().find(|(k, _)| *k == id).map(|(_, y)| (t, y.clone())))
                .unzip();
            Trajectory { times, points }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlcParams {
    /// Weight of the spatial term; the temporal term gets the rest.
    pub spatial_weight: f64,
    pub spatial_scale: f64,
    pub temporal_scale: f64,
}

impl Default for StlcParams {
    fn default() -> Self {
        Self {
            spatial_weight: 0.5,
            spatial_scale: 1.0,
            temporal_scale: 1.0,
        }
    }
}

impl StlcParams {
    /// Spatial scale from the data: the median distance from each
    /// observation to its nearest neighbour in the same frame. Falls back
    /// to 1 when no frame holds two observations.
    pub fn for_observations(obs: &ObservationSet) -> Self {
        let mut nn: Vec<f64> = Vec::new();
        for frame in obs.frames() {
            for (i, a) in frame.iter().enumerate() {
                let best = frame
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, b)| (a - b).norm())
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() && best > 0.0 {
                    nn.push(best);
                }
            }
        }
        let spatial_scale = if nn.is_empty() {
            1.0
        } else {
            nn.sort_by(f64::total_cmp);
            let m = nn.len();
            if m % 2 == 1 {
                nn[m / 2]
            } else {
                0.5 * (nn[m / 2 - 1] + nn[m / 2])
            }
        };
        Self {
            spatial_scale,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.spatial_weight) {
            return Err(Error::Parameter("spatial weight must lie in [0, 1]".into()));
        }
        if !(self.spatial_scale > 0.0 && self.temporal_scale > 0.0) {
            return Err(Error::Parameter("STLC scales must be positive".into()));
        }
        Ok(())
    }
}

/// Mean spatial and temporal similarity of `a`'s points against `b`.
fn directed(a: &Trajectory, b: &Trajectory, p: &StlcParams) -> (f64, f64) {
    let (mut s, mut t) = (0.0, 0.0);
    for (&ta, ya) in a.times.iter().zip(&a.points) {
        let (yb, dt) = b.aligned(ta);
        s += (-(ya - yb).norm() / p.spatial_scale).exp();
        t += (-dt / p.temporal_scale).exp();
    }
    let n = a.len() as f64;
    (s / n, t / n)
}

/// Similarity in [0, 1]; 1 for identical trajectories.
pub fn stlc_similarity(a: &Trajectory, b: &Trajectory, p: &StlcParams) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("STLC needs nonempty trajectories".into()));
    }
    let (sa, ta) = directed(a, b, p);
    let (sb, tb) = directed(b, a, p);
    let spatial = 0.5 * (sa + sb);
    let temporal = 0.5 * (ta + tb);
    Ok(p.spatial_weight * spatial + (1.0 - p.spatial_weight) * temporal)
}

/// Cost in [0, 2]; 0 for identical trajectories.
pub fn stlc_cost(a: &Trajectory, b: &Trajectory, p: &StlcParams) -> Result<f64> {
    Ok(2.0 - 2.0 * stlc_similarity(a, b, p)?)
}
