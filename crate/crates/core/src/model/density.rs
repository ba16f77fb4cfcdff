use super::counts::{check_validity, derive_counts, log_counts_prior};
use super::kernel::Model;
use super::types::{Annotation, Association, ObsRef, ObservationSet, Track};
use crate::error::{Error, Result};

/// Dynamics log-density of one track: prior on the first stored state, then
/// gap-marginalized transitions between consecutive stored states.
pub fn track_log_dynamics(track: &Track, model: &Model) -> f64 {
    let mut total = 0.0;
    let mut prev = None;
    for (&t, x) in track.times.iter().zip(&track.states) {
        total += model.log_transition(prev, t, x);
        prev = Some((t, x));
    }
    total
}

pub fn track_log_observation(track: &Track, obs: &ObservationSet, model: &Model) -> f64 {
    track
        .claims()
        .zip(&track.states)
        .map(|(at, x)| model.log_obs(obs.get(at), x))
        .sum()
}

/// Cached per-track factor: dynamics plus the observations it claims.
pub fn track_weight(track: &Track, obs: &ObservationSet, model: &Model) -> f64 {
    track_log_dynamics(track, model) + track_log_observation(track, obs, model)
}

pub fn log_dynamics(tracks: &[Track], model: &Model) -> f64 {
    tracks.iter().map(|t| track_log_dynamics(t, model)).sum()
}

/// Observation log-density of every observation under `z`.
///
/// Object-associated observations are scored against the state stored for
/// that object at that time; a missing state is an error.
pub fn log_observation(
    obs: &ObservationSet,
    z: &Association,
    tracks: &[Track],
    model: &Model,
) -> Result<f64> {
    let mut total = 0.0;
    for at in obs.refs() {
        let y = obs.get(at);
        total += match z.get(at) {
            0 => model.log_clutter(y),
            k => {
                let x = tracks
                    .get(k - 1)
                    .and_then(|tr| tr.position(at.t).map(|i| &tr.states[i]))
                    .ok_or_else(|| {
                        Error::Inconsistent(format!(
                            "object {k} has no state at t={} for observation {}",
                            at.t + 1,
                            at.n
                        ))
                    })?;
                model.log_obs(y, x)
            }
        };
    }
    Ok(total)
}

pub fn log_annotations(annotations: &[Annotation], z: &Association) -> f64 {
    annotations.iter().map(|a| a.log_likelihood(z)).sum()
}

/// Unnormalized log joint recomputed from scratch; `-inf` for invalid hypotheses.
pub fn log_joint(
    obs: &ObservationSet,
    z: &Association,
    tracks: &[Track],
    annotations: &[Annotation],
    model: &Model,
) -> Result<f64> {
    let Ok(counts) = derive_counts(z) else {
        return Ok(f64::NEG_INFINITY);
    };
    if check_validity(z, &counts).is_err() {
        return Ok(f64::NEG_INFINITY);
    }
    if tracks.len() != z.num_objects() {
        return Err(Error::Inconsistent(format!(
            "{} tracks for {} object labels",
            tracks.len(),
            z.num_objects()
        )));
    }
    for (i, tr) in tracks.iter().enumerate() {
        let claimed: Vec<ObsRef> = tr.claims().collect();
        let labeled: Vec<ObsRef> = obs.refs().filter(|&at| z.get(at) == i + 1).collect();
        if claimed != labeled || tr.states.len() != tr.times.len() {
            return Err(Error::Inconsistent(format!(
                "track {} does not match its association",
                i + 1
            )));
        }
    }
    Ok(log_counts_prior(&counts, model.params())
        + log_dynamics(tracks, model)
        + log_observation(obs, z, tracks, model)?
        + log_annotations(annotations, z))
}
