use std::sync::Arc;

use jpt_core::model::{
    check_validity, derive_counts, log_annotations, log_counts_prior, log_dynamics, log_joint, log_observation,
    Annotation, ChainState, Design, ModelParams, ObsRef, Provenance, Scene, Track,
};
use jpt_core::ObservationSet;
use nalgebra::DVector;
use proptest::prelude::*;

/// Objects given as (time mask, values) plus clutter values per frame.
#[derive(Debug, Clone)]
struct Instance {
    horizon: usize,
    objects: Vec<(Vec<bool>, Vec<f64>)>,
    clutter: Vec<Vec<f64>>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..6).prop_flat_map(|horizon| {
        let object = (
            prop::collection::vec(any::<bool>(), horizon),
            prop::collection::vec(-3.0..3.0f64, horizon),
        )
            .prop_filter("two observations", |(m, _)| m.iter().filter(|b| **b).count() >= 2);
        (
            Just(horizon),
            prop::collection::vec(object, 0..4),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 0..3), horizon),
        )
            .prop_map(|(horizon, objects, clutter)| Instance { horizon, objects, clutter })
    })
}

fn build(inst: &Instance) -> (Scene, Vec<Track>) {
    let mut frames: Vec<Vec<f64>> = vec![Vec::new(); inst.horizon];
    let mut tracks = Vec::new();
    for (mask, values) in &inst.objects {
        let mut tr = Track { times: vec![], obs: vec![], states: vec![] };
        for t in (0..inst.horizon).filter(|&t| mask[t]) {
            tr.times.push(t);
            tr.obs.push(frames[t].len());
            tr.states.push(DVector::from_element(1, values[t] * 0.9));
            frames[t].push(values[t]);
        }
        tracks.push(tr);
    }
    for (t, c) in inst.clutter.iter().enumerate() {
        frames[t].extend(c);
    }
    let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
    let params = ModelParams::scalar(0.5, 0.2, 0.0, 4.0, 0.0, 16.0, 0.4, 0.8, 0.85, 0.2);
    (Scene::new(ObservationSet::from_scalars(&refs), params).unwrap(), tracks)
}

fn some_annotation(scene: &Scene) -> Option<Annotation> {
    let refs: Vec<ObsRef> = scene.obs.refs().collect();
    let a = *refs.first()?;
    let b = *refs.iter().find(|r| r.t != a.t)?;
    Some(Annotation {
        design: Design::new(a, b),
        same: true,
        reliability: 0.9,
        provenance: Provenance::SimulatedOracle,
        round: 1,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derived_counts_are_valid(inst in instance()) {
        let (scene, tracks) = build(&inst);
        let state = ChainState::from_tracks(&scene, tracks, Arc::from(vec![]));
        let z = state.association();
        let m = derive_counts(z).unwrap();
        prop_assert_eq!(check_validity(z, &m), Ok(()));
        prop_assert_eq!(&m, state.counts());
        prop_assert!(m.existing().iter().all(|&e| e >= 0));
    }

    #[test]
    fn joint_decomposes_into_factors(inst in instance()) {
        let (scene, tracks) = build(&inst);
        let ann: Vec<Annotation> = some_annotation(&scene).into_iter().collect();
        let state = ChainState::from_tracks(&scene, tracks.clone(), Arc::from(ann.clone()));
        let z = state.association();
        let m = derive_counts(z).unwrap();
        let parts = [
            log_counts_prior(&m, scene.model.params()),
            log_dynamics(&tracks, &scene.model),
            log_observation(&scene.obs, z, &tracks, &scene.model).unwrap(),
            log_annotations(&ann, z),
        ];
        prop_assert!(parts.iter().all(|p| p.is_finite()));
        let total = log_joint(&scene.obs, z, &tracks, &ann, &scene.model).unwrap();
        prop_assert!((total - parts.iter().sum::<f64>()).abs() < 1e-9);
        // cached value agrees with the from-scratch one
        prop_assert!((state.log_joint() - state.recompute_log_joint(&scene).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn relabeling_objects_keeps_joint(inst in instance(), rot in 0usize..4) {
        let (scene, mut tracks) = build(&inst);
        let ann: Vec<Annotation> = some_annotation(&scene).into_iter().collect();
        let before = ChainState::from_tracks(&scene, tracks.clone(), Arc::from(ann.clone())).log_joint();
        if !tracks.is_empty() {
            let k = rot % tracks.len();
            tracks.rotate_left(k);
            tracks.reverse();
        }
        let after = ChainState::from_tracks(&scene, tracks, Arc::from(ann));
        prop_assert!((before - after.log_joint()).abs() < 1e-9);
        prop_assert!((after.recompute_log_joint(&scene).unwrap() - before).abs() < 1e-9);
    }

    #[test]
    fn one_observation_object_has_zero_mass(inst in instance(), which in 0usize..4) {
        let (scene, mut tracks) = build(&inst);
        prop_assume!(!tracks.is_empty());
        let k = which % tracks.len();
        let tr = &mut tracks[k];
        tr.times.truncate(1);
        tr.obs.truncate(1);
        tr.states.truncate(1);
        let state = ChainState::from_tracks(&scene, tracks, Arc::from(vec![]));
        prop_assert_eq!(state.log_joint(), f64::NEG_INFINITY);
        prop_assert_eq!(state.recompute_log_joint(&scene).unwrap(), f64::NEG_INFINITY);
    }
}
