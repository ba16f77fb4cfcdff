#![allow(dead_code)]

use std::collections::HashMap;

use jpt_core::gaussian::log_marginal_likelihood;
use jpt_core::linalg::log_sum_exp_sorted;
use jpt_core::model::{derive_counts, log_counts_prior, Association, ModelParams, ObsRef, Scene};
use jpt_core::ObservationSet;

/// Relabel objects in order of first appearance (time-major), so that every
/// labeling of the same partition maps to one key.
pub fn canonical(z: &Association) -> Vec<Vec<usize>> {
    let mut map = vec![0usize; z.num_objects() + 1];
    let mut next = 1;
    z.labels()
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|&k| {
                    if k == 0 {
                        0
                    } else {
                        if map[k] == 0 {
                            map[k] = next;
                            next += 1;
                        }
                        map[k]
                    }
                })
                .collect()
        })
        .collect()
}

/// Every valid association (canonical labels) with its exact log posterior
/// mass, up to a shared constant: counts prior, per-object marginal
/// likelihood with trajectories integrated out, and clutter densities.
pub fn enumerate_posterior(scene: &Scene) -> HashMap<Vec<Vec<usize>>, f64> {
    let refs: Vec<ObsRef> = scene.obs.refs().collect();
    let counts = scene.obs.counts();
    let mut out = HashMap::new();
    let mut labels = vec![0usize; refs.len()];
    fn rec(
        i: usize,
        next: usize,
        refs: &[ObsRef],
        labels: &mut Vec<usize>,
        counts: &[usize],
        scene: &Scene,
        out: &mut HashMap<Vec<Vec<usize>>, f64>,
    ) {
        if i == refs.len() {
            let mut frames: Vec<Vec<usize>> = counts.iter().map(|&n| vec![0; n]).collect();
            for (r, &k) in refs.iter().zip(labels.iter()) {
                frames[r.t][r.n] = k;
            }
            let z = Association::new(frames.clone());
            if let Some(lp) = log_mass(&z, scene) {
                out.insert(frames, lp);
            }
            return;
        }
        for k in 0..=next {
            let clash = k > 0 && (0..i).any(|j| labels[j] == k && refs[j].t == refs[i].t);
            if clash {
                continue;
            }
            labels[i] = k;
            rec(i + 1, if k == next { next + 1 } else { next }, refs, labels, counts, scene, out);
        }
        labels[i] = 0;
    }
    rec(0, 1, &refs, &mut labels, &counts, scene, &mut out);
    out
}

fn log_mass(z: &Association, scene: &Scene) -> Option<f64> {
    let m = derive_counts(z).ok()?;
    let k = z.num_objects();
    let mut total = log_counts_prior(&m, scene.model.params());
    for obj in 1..=k {
        let claims: Vec<ObsRef> = scene.obs.refs().filter(|&r| z.get(r) == obj).collect();
        if claims.len() < 2 {
            return None;
        }
        let times: Vec<usize> = claims.iter().map(|r| r.t).collect();
        let ys: Vec<_> = claims.iter().map(|&r| scene.obs.get(r).clone()).collect();
        total += log_marginal_likelihood(&times, &ys, &scene.model).unwrap();
    }
    for r in scene.obs.refs() {
        if z.get(r) == 0 {
            total += scene.model.log_clutter(scene.obs.get(r));
        }
    }
    total.is_finite().then_some(total)
}

pub fn normalize(log_mass: &HashMap<Vec<Vec<usize>>, f64>) -> HashMap<Vec<Vec<usize>>, f64> {
    let all: Vec<f64> = log_mass.values().copied().collect();
    let z = log_sum_exp_sorted(&all);
    log_mass.iter().map(|(k, v)| (k.clone(), (v - z).exp())).collect()
}

pub fn total_variation_maps(p: &HashMap<Vec<Vec<usize>>, f64>, q: &HashMap<Vec<Vec<usize>>, f64>) -> f64 {
    let mut keys: Vec<&Vec<Vec<usize>>> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (p.get(*k).unwrap_or(&0.0) - q.get(*k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Small scalar scene with two observations at the first and last step.
pub fn enumerable_scene() -> Scene {
    let obs = ObservationSet::from_scalars(&[&[0.0, 2.2], &[0.6], &[1.1, 2.6]]);
    let params = ModelParams::scalar(1.0, 0.3, 1.2, 4.0, 1.2, 6.0, 0.6, 0.6, 0.8, 0.3);
    Scene::new(obs, params).unwrap()
}

