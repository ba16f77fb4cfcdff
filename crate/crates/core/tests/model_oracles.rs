//! Hand-checked values for counts, validity and the joint density.
//! Reference numbers come from an independent scalar script using only
//! `math.lgamma` and the Gaussian log-pdf formula.

use std::sync::Arc;

use approx::assert_relative_eq;
use jpt_core::model::{
    check_validity, derive_counts, log_counts_prior, log_dynamics, log_joint, log_observation, Annotation,
    Association, ChainState, CountKind, Design, EventCounts, Model, ModelParams, ObsRef, Provenance, Scene, Track,
    Violation,
};
use jpt_core::ObservationSet;
use nalgebra::DVector;

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn track(points: &[(usize, usize, f64)]) -> Track {
    Track {
        times: points.iter().map(|p| p.0).collect(),
        obs: points.iter().map(|p| p.1).collect(),
        states: points.iter().map(|p| v(p.2)).collect(),
    }
}

/// Object 1 at t = 1..3, object 2 at t = 2..4, one clutter point at t = 4.
fn two_object_labels() -> Association {
    Association::new(vec![vec![1], vec![1, 2], vec![2, 1], vec![0, 2]])
}

fn two_object_scene() -> (Scene, Vec<Track>) {
    let obs = ObservationSet::from_scalars(&[&[0.1], &[0.3, 2.0], &[2.2, 0.45], &[5.0, 2.5]]);
    let params = ModelParams::scalar(0.2, 0.1, 1.0, 4.0, 0.0, 9.0, 0.1, 0.5, 0.9, 0.1);
    let tracks = vec![
        track(&[(0, 0, 0.0), (1, 0, 0.35), (2, 1, 0.5)]),
        track(&[(1, 1, 2.1), (2, 0, 2.15), (3, 1, 2.4)]),
    ];
    (Scene::new(obs, params).unwrap(), tracks)
}

#[test]
fn counts_all_clutter() {
    let z = Association::all_clutter(&[2, 1, 2]);
    let m = derive_counts(&z).unwrap();
    assert_eq!(m.arrivals, vec![0, 0, 0]);
    assert_eq!(m.clutter, vec![2, 1, 2]);
    assert_eq!(m.detections, vec![0, 0, 0]);
    assert_eq!(m.departures, vec![0, 0, 0]);
}

#[test]
fn counts_with_missed_detection() {
    // one object at t = 1, 2, 4, 5; nothing at t = 3
    let z = Association::new(vec![vec![1], vec![1], vec![0], vec![1], vec![1]]);
    let m = derive_counts(&z).unwrap();
    assert_eq!(m.arrivals, vec![1, 0, 0, 0, 0]);
    assert_eq!(m.departures, vec![0, 0, 0, 0, 1]);
    assert_eq!(m.detections, vec![0, 1, 0, 1, 1]);
    assert_eq!(m.clutter, vec![0, 0, 1, 0, 0]);
}

#[test]
fn counts_two_objects() {
    let m = derive_counts(&two_object_labels()).unwrap();
    assert_eq!(m.arrivals, vec![1, 1, 0, 0]);
    assert_eq!(m.departures, vec![0, 0, 1, 1]);
    assert_eq!(m.detections, vec![0, 1, 2, 1]);
    assert_eq!(m.clutter, vec![0, 0, 0, 1]);
    assert_eq!(m.existing(), vec![1, 2, 1, 0]);
}

#[test]
fn validity_examples() {
    let dup = Association::new(vec![vec![1], vec![1, 1], vec![1]]);
    assert_eq!(derive_counts(&dup), Err(Violation::DuplicateClaim { t: 1, k: 1 }));

    let empty = Association::new(vec![vec![]]);
    assert_eq!(check_validity(&empty, &EventCounts::zeros(1)), Ok(()));

    let z = two_object_labels();
    let mut m = derive_counts(&z).unwrap();
    assert_eq!(check_validity(&z, &m), Ok(()));
    m.clutter[3] = 0;
    assert_eq!(
        check_validity(&z, &m),
        Err(Violation::CountMismatch {
            t: 3,
            kind: CountKind::Clutter,
            expected: 1,
            found: 0
        })
    );
}

#[test]
fn single_observation_object_is_invalid() {
    let z = Association::new(vec![vec![1], vec![0]]);
    let m = derive_counts(&z).unwrap();
    assert_eq!(check_validity(&z, &m), Err(Violation::TooFewObservations { k: 1, count: 1 }));
}

#[test]
fn counts_prior_values() {
    let p = ModelParams::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.1, 0.5, 0.9, 0.1);
    assert_relative_eq!(log_counts_prior(&EventCounts::zeros(4), &p), -4.0 * 0.6, epsilon = 1e-14);

    let m = derive_counts(&two_object_labels()).unwrap();
    assert_relative_eq!(log_counts_prior(&m, &p), -12.242_503_465_923_14, epsilon = 1e-12);

    let mut bad = m.clone();
    bad.departures[1] = 2;
    assert_eq!(log_counts_prior(&bad, &p), f64::NEG_INFINITY);
}

#[test]
fn dynamics_prior_only_and_gap() {
    let p = ModelParams::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.1, 0.5, 0.9, 0.1);
    let model = Model::new(p, 5).unwrap();
    let single = track(&[(2, 0, 0.7)]);
    let expect = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * 0.49;
    assert_relative_eq!(log_dynamics(&[single], &model), expect, epsilon = 1e-14);
    // states 0 at t = 1 and 3 at t = 4: three-step predictive variance 3
    let gap = track(&[(0, 0, 0.0), (3, 0, 3.0)]);
    assert_relative_eq!(log_dynamics(&[gap], &model), -3.8871832107434003, epsilon = 1e-12);
}

#[test]
fn observation_zero_residual() {
    let p = ModelParams::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.1, 0.5, 0.9, 0.1);
    let model = Model::new(p, 2).unwrap();
    let obs = ObservationSet::from_scalars(&[&[2.0], &[2.0]]);
    let z = Association::new(vec![vec![1], vec![1]]);
    let tr = track(&[(0, 0, 2.0), (1, 0, 2.0)]);
    let lo = log_observation(&obs, &z, &[tr], &model).unwrap();
    assert_relative_eq!(lo, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
}

#[test]
fn observation_missing_state_is_error() {
    let p = ModelParams::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.1, 0.5, 0.9, 0.1);
    let model = Model::new(p, 2).unwrap();
    let obs = ObservationSet::from_scalars(&[&[2.0], &[2.0]]);
    let z = Association::new(vec![vec![1], vec![1]]);
    let tr = track(&[(0, 0, 2.0)]);
    assert!(log_observation(&obs, &z, &[tr], &model).is_err());
}

#[test]
fn mixed_instance_components() {
    let (scene, tracks) = two_object_scene();
    let z = two_object_labels();
    let lo = log_observation(&scene.obs, &z, &tracks, &scene.model).unwrap();
    assert_relative_eq!(lo, -2.1998156310075707, epsilon = 1e-12);
    assert_relative_eq!(log_dynamics(&tracks, &scene.model), -4.482_299_735_479_726, epsilon = 1e-12);
    let lj = log_joint(&scene.obs, &z, &tracks, &[], &scene.model).unwrap();
    assert_relative_eq!(lj, -18.924618832410438, epsilon = 1e-12);

    let state = ChainState::from_tracks(&scene, tracks.clone(), Arc::from(vec![]));
    assert_eq!(state.association(), &z);
    assert_relative_eq!(state.log_joint(), lj, epsilon = 1e-12);
}

#[test]
fn correct_annotation_adds_log_reliability() {
    let (scene, tracks) = two_object_scene();
    let z = two_object_labels();
    let base = log_joint(&scene.obs, &z, &tracks, &[], &scene.model).unwrap();
    let a = Annotation {
        design: Design::new(ObsRef::new(0, 0), ObsRef::new(2, 1)),
        same: true,
        reliability: 0.99,
        provenance: Provenance::Human,
        round: 1,
    };
    let with = log_joint(&scene.obs, &z, &tracks, std::slice::from_ref(&a), &scene.model).unwrap();
    assert_relative_eq!(with, base + 0.99f64.ln(), epsilon = 1e-12);
    let state = ChainState::from_tracks(&scene, tracks, Arc::from(vec![a]));
    assert_relative_eq!(state.log_joint(), with, epsilon = 1e-12);
}

#[test]
fn invalid_association_scores_negative_infinity() {
    let (scene, tracks) = two_object_scene();
    let z = Association::new(vec![vec![1], vec![1, 1], vec![2, 1], vec![0, 2]]);
    assert_eq!(log_joint(&scene.obs, &z, &tracks, &[], &scene.model).unwrap(), f64::NEG_INFINITY);
}
