use std::sync::Arc;

use rand::Rng;

use super::{Diagnostics, MoveKind, Proposal};
use crate::error::Result;
use crate::gaussian::{backward_sample, filter_pass};
use crate::model::{track_weight, ChainState, Scene, Track};
use crate::rng::stream;

/// Redraw one track's states from their joint conditional given its claims.
/// Returns the new track and whether any covariance needed jitter.
pub fn gibbs_track<R: Rng + ?Sized>(track: &Track, scene: &Scene, rng: &mut R) -> Result<(Track, bool)> {
    let ys: Vec<_> = track.claims().map(|at| scene.obs.get(at).clone()).collect();
    let steps = filter_pass(&track.times, &ys, &scene.model)?;
    let (states, jittered) = backward_sample(&steps, &scene.model, rng)?;
    Ok((
        Track {
            times: track.times.clone(),
            obs: track.obs.clone(),
            states,
        },
        jittered,
    ))
}

/// Gibbs sweep over every object's trajectory. Associations and counts are
/// unchanged and the move is always accepted.
///
/// Each object draws from its own stream seeded by one draw from `rng`, so the
/// result does not depend on the order objects are processed in.
pub fn gibbs_trajectories<R: Rng + ?Sized>(state: &ChainState, scene: &Scene, rng: &mut R) -> Result<Proposal> {
    let base: u64 = rng.random();
    let redrawn = state
        .tracks()
        .iter()
        .enumerate()
        .map(|(i, tr)| gibbs_track(tr, scene, &mut stream(&[base, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let jittered = redrawn.iter().any(|(_, j)| *j);
    let tracks: Vec<Track> = redrawn.into_iter().map(|(t, _)| t).collect();
    let weights = tracks.iter().map(|t| track_weight(t, &scene.obs, &scene.model)).collect();
    let candidate = ChainState::with_weights(scene, tracks, weights, Arc::clone(state.annotations()));
    Ok(Proposal {
        kind: MoveKind::Ffbs,
        candidate: Some(candidate),
        log_ratio: 0.0,
        diagnostics: Diagnostics {
            jittered,
            ..Default::default()
        },
    })
}
