//! Synthetic scenes: the three-object K33 instance and the two-object teaser.
//!
//! Objects move in a 1-D unit band along piecewise-linear paths. Where two
//! or three paths run parallel one noise SD apart, the observations cannot
//! tell which continuation belongs to which object; every way of re-dealing
//! the continuations at those points is a reference mode.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::model::{Association, GroundTruth, ModelParams, ObsRef, ObservationSet, Track};
use crate::rng::stream;

pub const K33_HORIZON: usize = 39;
pub const TEASER_HORIZON: usize = 20;
pub const DEFAULT_NOISE: f64 = 0.05;

/// Keyframes `(t, position)` with 1-based t.
type Path = &'static [(usize, f64)];

const K33_PATHS: [Path; 3] = [
    &[(1, 0.8), (5, 0.8), (8, 0.525), (12, 0.525), (15, 0.8), (24, 0.8), (27, 0.55), (32, 0.55), (35, 0.8), (39, 0.8)],
    &[(1, 0.5), (5, 0.5), (8, 0.475), (12, 0.475), (15, 0.5), (16, 0.5), (18, 0.375), (22, 0.375), (24, 0.5), (39, 0.5)],
    &[(1, 0.2), (16, 0.2), (18, 0.325), (22, 0.325), (24, 0.2), (25, 0.2), (27, 0.45), (32, 0.45), (34, 0.2), (39, 0.2)],
];

/// Cut times (1-based, last time before the cut) and the objects whose
/// continuations may be re-dealt there.
const K33_CUTS: [(usize, &[usize]); 3] = [(10, &[0, 1]), (20, &[1, 2]), (30, &[0, 1, 2])];

const TEASER_PATHS: [Path; 2] = [
    &[(1, 0.8), (7, 0.525), (13, 0.525), (20, 0.8)],
    &[(1, 0.2), (7, 0.475), (13, 0.475), (20, 0.2)],
];

const TEASER_CUTS: [(usize, &[usize]); 1] = [(10, &[0, 1])];

/// A generated scene with its truth and the reference modes.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub obs: ObservationSet,
    pub truth: GroundTruth,
    pub params: ModelParams,
    /// Each mode is a complete set of tracks (states at the observations).
    pub modes: Vec<Vec<Track>>,
}

fn position(path: Path, t: usize) -> f64 {
    let i = path.iter().position(|&(tk, _)| tk >= t).expect("time within path");
    let (t1, y1) = path[i];
    if t1 == t || i == 0 {
        return y1;
    }
    let (t0, y0) = path[i - 1];
    y0 + (y1 - y0) * (t - t0) as f64 / (t1 - t0) as f64
}

/// Random-walk model matched to the generators.
pub fn band_params(noise: f64) -> ModelParams {
    let r = noise.max(1e-3).powi(2);
    ModelParams::scalar(0.01, r, 0.5, 1.0, 0.5, 1.0, 0.1, 0.1, 0.99, 0.01)
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

fn generate(paths: &[Path], cuts: &[(usize, &[usize])], horizon: usize, seed: u64, noise: f64, tag: u64) -> SyntheticScene {
    let mut rng = stream(&[seed, tag]);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut frames = Vec::with_capacity(horizon);
    let mut labels = Vec::with_capacity(horizon);
    let mut truth_frames = Vec::with_capacity(horizon);
    // owner[t][k]: observation index of object k at t.
    let mut owner = vec![vec![0usize; paths.len()]; horizon];
    for t in 0..horizon {
        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.shuffle(&mut rng);
        let mut frame = Vec::with_capacity(paths.len());
        let mut lab = Vec::with_capacity(paths.len());
        for (n, &k) in order.iter().enumerate() {
            let y = position(paths[k], t + 1) + if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            frame.push(DVector::from_element(1, y));
            lab.push(k + 1);
            owner[t][k] = n;
        }
        frames.push(frame);
        labels.push(lab);
        truth_frames.push(
            (0..paths.len())
                .map(|k| (k + 1, DVector::from_element(1, position(paths[k], t + 1))))
                .collect(),
        );
    }
    let obs = ObservationSet::new(1, frames).expect("well-formed frames");

    // segment boundaries in 0-based times: [start, end)
    let mut bounds = vec![0usize];
    bounds.extend(cuts.iter().map(|&(t, _)| t));
    bounds.push(horizon);
    let mut dealings: Vec<Vec<Vec<usize>>> = vec![vec![(0..paths.len()).collect()]];
    for &(_, group) in cuts {
        let mut next = Vec::new();
        for d in &dealings {
            let prev = d.last().expect("nonempty").clone();
            for perm in permutations(group.len()) {
                // the slot that held group[i] continues with group[perm[i]]
                let mut cur = prev.clone();
                for (i, &g) in group.iter().enumerate() {
                    let src = group[perm[i]];
                    let slot = prev.iter().position(|&o| o == g).expect("object owns a slot");
                    cur[slot] = src;
                }
                let mut d2 = d.clone();
                d2.push(cur);
                next.push(d2);
            }
        }
        dealings = next;
    }
    let modes = dealings
        .into_iter()
        .map(|d| {
            (0..paths.len())
                .map(|slot| {
                    let mut tr = Track { times: Vec::new(), obs: Vec::new(), states: Vec::new() };
                    for s in 0..d.len() {
                        let k = d[s][slot];
                        for t in bounds[s]..bounds[s + 1] {
                            let n = owner[t][k];
                            tr.times.push(t);
                            tr.obs.push(n);
                            tr.states.push(obs.get(ObsRef::new(t, n)).clone());
                        }
                    }
                    tr
                })
                .collect()
        })
        .collect();
    SyntheticScene {
        obs,
        truth: GroundTruth {
            frames: truth_frames,
            labels: Some(Association::new(labels)),
        },
        params: band_params(noise),
        modes,
    }
}

/// 39 steps, 3 objects, 117 observations, 24 reference modes. The first mode
/// is the true association.
pub fn generate_k33(seed: u64, noise: f64) -> SyntheticScene {
    generate(&K33_PATHS, &K33_CUTS, K33_HORIZON, seed, noise, 33)
}

/// Two objects that converge, run side by side, and separate: two modes.
pub fn generate_teaser(seed: u64, noise: f64) -> SyntheticScene {
    generate(&TEASER_PATHS, &TEASER_CUTS, TEASER_HORIZON, seed, noise, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn k33_sizes() {
        let s = generate_k33(1, DEFAULT_NOISE);
        assert_eq!(s.obs.horizon(), 39);
        assert_eq!(s.obs.total(), 117);
        assert_eq!(s.truth.object_ids(), vec![1, 2, 3]);
        assert_eq!(s.modes.len(), 24);
        let distinct: HashSet<Vec<Vec<usize>>> = s
            .modes
            .iter()
            .map(|m| {
                let mut v: Vec<Vec<usize>> = m.iter().map(|tr| tr.obs.clone()).collect();
                v.sort();
                v
            })
            .collect();
        assert_eq!(distinct.len(), 24);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_k33(4, DEFAULT_NOISE);
        let b = generate_k33(4, DEFAULT_NOISE);
        let c = generate_k33(5, DEFAULT_NOISE);
        assert_eq!(a.obs, b.obs);
        assert_ne!(a.obs, c.obs);
    }

    #[test]
    fn permutations_lexicographic() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn paths_meet_at_cuts() {
        for &(t, group) in &K33_CUTS {
            let ys: Vec<f64> = group.iter().map(|&k| position(K33_PATHS[k], t)).collect();
            for w in ys.windows(2) {
                assert!((w[0] - w[1]).abs() <= 0.0501, "{t}: {ys:?}");
            }
        }
    }
}
