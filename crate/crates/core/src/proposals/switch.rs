//! Switch: re-deal the (observation, state) pairs of a subset of objects
//! among those objects, one time step at a time, in proportion to the
//! dynamics of the re-dealt histories.
//!
//! Pairs move as units, so the observation factor never changes. The
//! proposal density of the new dealing is its dynamics density divided by the
//! per-step normalizers `Z_t`. Replaying the original dealing against the
//! original histories gives the reverse normalizers `Z'_t`, and
//! `log R = log p(M') - log p(M) + sum_t (Z_t - Z'_t)` plus annotation terms.
//! When every object in the subset is observed at every switch time the
//! per-step weight multisets coincide and the ratio is exactly zero.

use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;

use super::{Diagnostics, MoveKind, Proposal, ProposalConfig};
use crate::error::Result;
use crate::linalg::{log_sum_exp_sorted, sample_log_categorical, sum_sorted};
use crate::model::{log_annotations, log_counts_prior, track_weight, ChainState, Model, Scene, Track};

type History<'a> = Option<(usize, &'a DVector<f64>)>;

/// All injections of `items` items into `slots` slots, as `slot index` per item.
fn injections(items: usize, slots: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, items: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == items {
            out.push(cur.clone());
            return;
        }
        for s in 0..used.len() {
            if !used[s] {
                used[s] = true;
                cur.push(s);
                rec(i + 1, items, used, cur, out);
                cur.pop();
                used[s] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, items, &mut vec![false; slots], &mut Vec::with_capacity(items), &mut out);
    out
}

/// Log weight of every injection given per-(item, slot) transition terms.
fn dealing_weights(terms: &[Vec<f64>], deals: &[Vec<usize>]) -> Vec<f64> {
    let mut buf = Vec::with_capacity(terms.len());
    deals
        .iter()
        .map(|deal| {
            buf.clear();
            buf.extend(deal.iter().enumerate().map(|(i, &s)| terms[i][s]));
            sum_sorted(&mut buf)
        })
        .collect()
}

fn transition_terms(model: &Model, t: usize, items: &[&DVector<f64>], hist: &[History<'_>], slots: &[usize]) -> Vec<Vec<f64>> {
    items
        .iter()
        .map(|x| slots.iter().map(|&s| model.log_transition(hist[s], t, x)).collect())
        .collect()
}

pub fn propose_switch<R: Rng + ?Sized>(
    state: &ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let k = state.num_objects();
    let max = config.max_subset.min(k);
    if max < 2 {
        return Ok(Proposal::no_op(MoveKind::Switch));
    }
    let size = rng.random_range(2..=max);
    let mut subset = index::sample(rng, k, size).into_vec();
    subset.sort_unstable();
    let tracks = state.tracks();
    let slots: Vec<&Track> = subset.iter().map(|&i| &tracks[i]).collect();
    // Slot s keeps whatever it holds at every t <= pin[s].
    let pin: Vec<Option<usize>> = slots
        .iter()
        .map(|tr| config.pin_switch.then(|| tr.times.get(1).copied()).flatten())
        .collect();
    let mut times: Vec<usize> = slots.iter().flat_map(|tr| tr.times.iter().copied()).collect();
    times.sort_unstable();
    times.dedup();

    let model = &scene.model;
    let mut hist_new: Vec<History<'_>> = vec![None; size];
    let mut hist_old: Vec<History<'_>> = vec![None; size];
    let mut cursor = vec![0usize; size];
    let mut dealt: Vec<Track> = vec![
        Track {
            times: Vec::new(),
            obs: Vec::new(),
            states: Vec::new(),
        };
        size
    ];
    let mut normalizer_gap = 0.0;
    for &t in &times {
        // Items present at t, tagged by their current owner.
        let mut owners = Vec::new();
        for (s, tr) in slots.iter().enumerate() {
            if cursor[s] < tr.len() && tr.times[cursor[s]] == t {
                owners.push((s, cursor[s]));
                cursor[s] += 1;
            }
        }
        let pinned = |s: usize| pin[s].is_some_and(|p| t <= p);
        let free_slots: Vec<usize> = (0..size).filter(|&s| !pinned(s)).collect();
        let free: Vec<(usize, usize)> = owners.iter().copied().filter(|&(s, _)| !pinned(s)).collect();
        let mut assignment: Vec<(usize, usize, usize)> = owners
            .iter()
            .filter(|&&(s, _)| pinned(s))
            .map(|&(s, i)| (s, s, i))
            .collect();
        if !free.is_empty() {
            let xs: Vec<&DVector<f64>> = free.iter().map(|&(s, i)| &slots[s].states[i]).collect();
            let deals = injections(free.len(), free_slots.len());
            let w_new = dealing_weights(&transition_terms(model, t, &xs, &hist_new, &free_slots), &deals);
            let w_old = dealing_weights(&transition_terms(model, t, &xs, &hist_old, &free_slots), &deals);
            let (choice, _) = sample_log_categorical(&w_new, rng);
            normalizer_gap += log_sum_exp_sorted(&w_new) - log_sum_exp_sorted(&w_old);
            for (item, &slot_idx) in deals[choice].iter().enumerate() {
                let (s, i) = free[item];
                assignment.push((free_slots[slot_idx], s, i));
            }
        }
        for &(target, owner, i) in &assignment {
            let x = &slots[owner].states[i];
            hist_new[target] = Some((t, x));
            hist_old[owner] = Some((t, x));
            dealt[target].times.push(t);
            dealt[target].obs.push(slots[owner].obs[i]);
            dealt[target].states.push(x.clone());
        }
    }
    let diagnostics = Diagnostics {
        subset_size: size,
        switch_times: times.len(),
        ..Default::default()
    };
    if dealt.iter().any(|tr| tr.len() < 2) {
        return Ok(Proposal::rejected(MoveKind::Switch, diagnostics));
    }
    let mut new_tracks = tracks.to_vec();
    let mut weights = state.weights().to_vec();
    for (tr, &i) in dealt.into_iter().zip(&subset) {
        weights[i] = track_weight(&tr, &scene.obs, model);
        new_tracks[i] = tr;
    }
    let candidate = ChainState::with_weights(scene, new_tracks, weights, Arc::clone(state.annotations()));
    let params = model.params();
    let log_ratio = (log_counts_prior(candidate.counts(), params) - log_counts_prior(state.counts(), params))
        + (log_annotations(state.annotations(), candidate.association())
            - log_annotations(state.annotations(), state.association()))
        + normalizer_gap;
    Ok(Proposal {
        kind: MoveKind::Switch,
        candidate: Some(candidate),
        log_ratio,
        diagnostics,
    })
}
