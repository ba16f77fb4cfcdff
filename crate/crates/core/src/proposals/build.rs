//! Gather, Disperse and Extend: moves that build a track by a forward sweep
//! over candidate observations.
//!
//! A sweep visits every time step in a window. At a step with no candidates
//! nothing happens (density factor 1). Otherwise the step is skipped with
//! probability `skip_prob`; if not skipped, one candidate is drawn with
//! probability proportional to its predictive likelihood given the track so
//! far, and the state is drawn from the exact Gaussian conditional. The same
//! factors give the density of building any given track, which supplies the
//! reverse terms of the Hastings ratios.

use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use super::{Diagnostics, MoveKind, Proposal, ProposalConfig};
use crate::error::Result;
use crate::linalg::{log_sum_exp_sorted, sample_log_categorical};
use crate::model::{track_weight, Annotation, ChainState, ObsRef, Scene, StepKernel, Track};

/// Candidate observations for a track sweep over `start..start + candidates.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildPlan {
    pub start: usize,
    pub candidates: Vec<Vec<usize>>,
}

impl BuildPlan {
    /// Window spanning the first and last time with any candidate; `None` if empty.
    fn from_frames(frames: Vec<Vec<usize>>) -> Option<Self> {
        let first = frames.iter().position(|c| !c.is_empty())?;
        let last = frames.iter().rposition(|c| !c.is_empty())?;
        Some(Self {
            start: first,
            candidates: frames[first..=last].to_vec(),
        })
    }

    pub fn end(&self) -> usize {
        self.start + self.candidates.len() - 1
    }

    fn step_weights<'s>(
        &self,
        scene: &'s Scene,
        prev: Option<(usize, &DVector<f64>)>,
        t: usize,
    ) -> (Vec<f64>, Cow<'s, StepKernel>, DVector<f64>) {
        let model = &scene.model;
        let h = &model.params().observation;
        let (kernel, m) = model.step(prev, t);
        let hm = h * &m;
        let w = self.candidates[t - self.start]
            .iter()
            .map(|&n| kernel.innovation.log_pdf(scene.obs.get(ObsRef::new(t, n)), &hm))
            .collect();
        (w, kernel, m)
    }

    /// Draw a track and its log proposal density.
    pub fn sample<R: Rng + ?Sized>(&self, scene: &Scene, skip_prob: f64, rng: &mut R) -> (Track, f64) {
        let h = &scene.model.params().observation;
        let mut track = Track {
            times: Vec::new(),
            obs: Vec::new(),
            states: Vec::new(),
        };
        let mut log_q = 0.0;
        for t in self.start..=self.end() {
            let cands = &self.candidates[t - self.start];
            if cands.is_empty() {
                continue;
            }
            if rng.random::<f64>() < skip_prob {
                log_q += skip_prob.ln();
                continue;
            }
            log_q += (1.0 - skip_prob).ln();
            let prev = track.times.last().map(|&tp| (tp, track.states.last().unwrap()));
            let (weights, kernel, m) = self.step_weights(scene, prev, t);
            let (i, lp) = sample_log_categorical(&weights, rng);
            let y = scene.obs.get(ObsRef::new(t, cands[i]));
            let mean = kernel.post_mean(&m, y, h);
            let x = kernel.post.sample(&mean, rng);
            log_q += lp + kernel.post.log_pdf(&x, &mean);
            track.times.push(t);
            track.obs.push(cands[i]);
            track.states.push(x);
        }
        (track, log_q)
    }

    /// Log density of building exactly `track` with this plan.
    pub fn log_density(&self, scene: &Scene, skip_prob: f64, track: &Track) -> f64 {
        if track.is_empty() || track.arrival() < self.start || track.departure() > self.end() {
            return f64::NEG_INFINITY;
        }
        let h = &scene.model.params().observation;
        let mut log_q = 0.0;
        let mut next = 0;
        for t in self.start..=self.end() {
            let cands = &self.candidates[t - self.start];
            let claimed = next < track.len() && track.times[next] == t;
            if !claimed {
                if !cands.is_empty() {
                    log_q += skip_prob.ln();
                }
                continue;
            }
            let Some(i) = cands.iter().position(|&n| n == track.obs[next]) else {
                return f64::NEG_INFINITY;
            };
            let prev = (next > 0).then(|| (track.times[next - 1], &track.states[next - 1]));
            let (weights, kernel, m) = self.step_weights(scene, prev, t);
            let y = scene.obs.get(ObsRef::new(t, cands[i]));
            let mean = kernel.post_mean(&m, y, h);
            log_q += (1.0 - skip_prob).ln()
                + weights[i]
                - log_sum_exp_sorted(&weights)
                + kernel.post.log_pdf(&track.states[next], &mean);
            next += 1;
        }
        log_q
    }
}

/// Clutter observations per time, if at least two times carry clutter.
pub fn gather_candidates(state: &ChainState, scene: &Scene) -> Option<BuildPlan> {
    let z = state.association();
    let frames: Vec<Vec<usize>> = (0..scene.horizon())
        .map(|t| {
            z.frame(t)
                .iter()
                .enumerate()
                .filter(|(_, &k)| k == 0)
                .map(|(n, _)| n)
                .collect()
        })
        .collect();
    if frames.iter().filter(|c| !c.is_empty()).count() < 2 {
        return None;
    }
    BuildPlan::from_frames(frames)
}

/// Candidates for extending object `k` (1-based): clutter plus its own claims.
fn extend_candidates(state: &ChainState, scene: &Scene, k: usize) -> Option<BuildPlan> {
    let z = state.association();
    let frames = (0..scene.horizon())
        .map(|t| {
            z.frame(t)
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == 0 || l == k)
                .map(|(n, _)| n)
                .collect()
        })
        .collect();
    BuildPlan::from_frames(frames)
}

/// Density of the gather sweep that would rebuild `track` from `state`
/// (in which the track's observations are clutter).
pub fn track_build_log_density(state: &ChainState, scene: &Scene, skip_prob: f64, track: &Track) -> f64 {
    match gather_candidates(state, scene) {
        Some(plan) => plan.log_density(scene, skip_prob, track),
        None => f64::NEG_INFINITY,
    }
}

fn annotations(state: &ChainState) -> Arc<[Annotation]> {
    Arc::clone(state.annotations())
}

pub fn propose_gather<R: Rng + ?Sized>(
    state: &ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let Some(plan) = gather_candidates(state, scene) else {
        return Ok(Proposal::no_op(MoveKind::Gather));
    };
    let (track, log_q) = plan.sample(scene, config.skip_prob, rng);
    let diagnostics = Diagnostics {
        claims: track.len(),
        ..Default::default()
    };
    if track.len() < 2 {
        return Ok(Proposal::rejected(MoveKind::Gather, diagnostics));
    }
    let mut tracks = state.tracks().to_vec();
    let mut weights = state.weights().to_vec();
    weights.push(track_weight(&track, &scene.obs, &scene.model));
    tracks.push(track);
    let candidate = ChainState::with_weights(scene, tracks, weights, annotations(state));
    let w = &config.weights;
    let log_ratio = candidate.log_joint() - state.log_joint() + w.disperse.ln()
        - (candidate.num_objects() as f64).ln()
        - w.gather.ln()
        - log_q;
    Ok(Proposal {
        kind: MoveKind::Gather,
        candidate: Some(candidate),
        log_ratio,
        diagnostics,
    })
}

pub fn propose_disperse<R: Rng + ?Sized>(
    state: &ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let k = state.num_objects();
    if k == 0 {
        return Ok(Proposal::no_op(MoveKind::Disperse));
    }
    let j = rng.random_range(0..k);
    let mut tracks = state.tracks().to_vec();
    let mut weights = state.weights().to_vec();
    // The highest label moves into the freed slot so labels stay contiguous.
    let removed = tracks.swap_remove(j);
    weights.swap_remove(j);
    let candidate = ChainState::with_weights(scene, tracks, weights, annotations(state));
    let log_q = track_build_log_density(&candidate, scene, config.skip_prob, &removed);
    let w = &config.weights;
    let log_ratio = candidate.log_joint() - state.log_joint() + w.gather.ln() + log_q
        - w.disperse.ln()
        + (k as f64).ln();
    Ok(Proposal {
        kind: MoveKind::Disperse,
        candidate: Some(candidate),
        log_ratio,
        diagnostics: Diagnostics {
            claims: removed.len(),
            ..Default::default()
        },
    })
}

/// Rebuilds one object's track from its own claims and the clutter.
///
/// The candidate sets are identical before and after the move, so the reverse
/// density is the same sweep evaluated on the old track.
pub fn propose_extend<R: Rng + ?Sized>(
    state: &ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let k = state.num_objects();
    if k == 0 {
        return Ok(Proposal::no_op(MoveKind::Extend));
    }
    let j = rng.random_range(0..k);
    let plan = extend_candidates(state, scene, j + 1).expect("object has claims");
    let (track, log_fwd) = plan.sample(scene, config.skip_prob, rng);
    let diagnostics = Diagnostics {
        claims: track.len(),
        ..Default::default()
    };
    if track.len() < 2 {
        return Ok(Proposal::rejected(MoveKind::Extend, diagnostics));
    }
    let log_rev = plan.log_density(scene, config.skip_prob, &state.tracks()[j]);
    let mut tracks = state.tracks().to_vec();
    let mut weights = state.weights().to_vec();
    weights[j] = track_weight(&track, &scene.obs, &scene.model);
    tracks[j] = track;
    let candidate = ChainState::with_weights(scene, tracks, weights, annotations(state));
    let log_ratio = candidate.log_joint() - state.log_joint() + log_rev - log_fwd;
    Ok(Proposal {
        kind: MoveKind::Extend,
        candidate: Some(candidate),
        log_ratio,
        diagnostics,
    })
}
