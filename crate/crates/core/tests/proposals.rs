mod common;

use std::sync::Arc;

use common::canonical;
use jpt_core::gaussian::{filter_pass, smoother_marginals};
use jpt_core::model::{check_validity, derive_counts, ChainState, ModelParams, Scene, Track};
use jpt_core::proposals::{
    accept, gibbs_track, propose, propose_disperse, propose_extend, propose_gather, propose_switch, MoveKind,
    ProposalConfig,
};
use jpt_core::rng::stream;
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

fn no_annotations() -> Arc<[jpt_core::Annotation]> {
    Arc::from(vec![])
}

/// Five points on a line, one per frame; birth and detection favour a
/// single object over clutter.
fn line_scene() -> Scene {
    let obs = ObservationSet::from_scalars(&[&[0.0], &[0.1], &[0.2], &[0.3], &[0.4]]);
    let params = ModelParams::scalar(0.01, 0.01, 0.2, 1.0, 0.0, 100.0, 0.5, 0.5, 0.95, 0.05);
    Scene::new(obs, params).unwrap()
}

fn line_track() -> Track {
    track(&[(0, 0, 0.0), (1, 0, 0.1), (2, 0, 0.2), (3, 0, 0.3), (4, 0, 0.4)])
}

/// Two objects observed at every frame.
fn two_lanes() -> (Scene, Vec<Track>) {
    let a = [0.0, 0.1, 0.25, 0.3];
    let b = [1.0, 0.9, 0.7, 0.5];
    let frames: Vec<Vec<f64>> = (0..4).map(|t| vec![a[t], b[t]]).collect();
    let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
    let params = ModelParams::scalar(0.05, 0.01, 0.5, 1.0, 0.5, 4.0, 0.2, 0.2, 0.9, 0.1);
    let tracks = vec![
        track(&(0..4).map(|t| (t, 0, a[t])).collect::<Vec<_>>()),
        track(&(0..4).map(|t| (t, 1, b[t])).collect::<Vec<_>>()),
    ];
    (Scene::new(ObservationSet::from_scalars(&refs), params).unwrap(), tracks)
}

fn acceptance_probability(log_ratio: f64) -> f64 {
    log_ratio.min(0.0).exp()
}

#[test]
fn switch_needs_two_objects() {
    let scene = line_scene();
    let state = ChainState::from_tracks(&scene, vec![line_track()], no_annotations());
    let p = propose_switch(&state, &scene, &ProposalConfig::default(), &mut stream(&[1])).unwrap();
    assert!(p.diagnostics.no_op && p.candidate.is_none());
}

#[test]
fn switch_with_full_tracks_is_always_accepted() {
    let (scene, tracks) = two_lanes();
    let mut state = ChainState::from_tracks(&scene, tracks, no_annotations());
    let config = ProposalConfig {
        pin_switch: false,
        ..ProposalConfig::default()
    };
    for i in 0..2000 {
        let mut rng = stream(&[3, i]);
        let p = propose_switch(&state, &scene, &config, &mut rng).unwrap();
        assert_eq!(p.log_ratio, 0.0);
        let out = accept(state, p, &mut rng);
        assert!(out.accepted);
        state = out.state;
        assert_eq!(state.counts(), &derive_counts(state.association()).unwrap());
    }
}

/// Unpinned switch on two objects over two frames: the (state, observation)
/// pairs at t=2 stay linked to their t=1 partners with probability
/// proportional to the product of the two transition densities.
#[test]
fn switch_dealing_probabilities_match_transition_densities() {
    let obs = ObservationSet::from_scalars(&[&[0.0, 1.0], &[0.7, 0.4]]);
    let params = ModelParams::scalar(0.3, 0.05, 0.5, 1.0, 0.5, 4.0, 0.2, 0.2, 0.9, 0.1);
    let scene = Scene::new(obs, params).unwrap();
    let tracks = vec![track(&[(0, 0, 0.0), (1, 0, 0.7)]), track(&[(0, 1, 1.0), (1, 1, 0.4)])];
    let start = ChainState::from_tracks(&scene, tracks, no_annotations());
    let kept = canonical(start.association());
    let log_n = |x: f64, m: f64| -0.5 * (x - m) * (x - m) / 0.3;
    let keep = (log_n(0.7, 0.0) + log_n(0.4, 1.0)).exp();
    let cross = (log_n(0.4, 0.0) + log_n(0.7, 1.0)).exp();
    let expect = keep / (keep + cross);
    let config = ProposalConfig {
        pin_switch: false,
        ..ProposalConfig::default()
    };
    let n = 40_000;
    let mut hits = 0;
    for i in 0..n {
        let mut rng = stream(&[5, i]);
        let p = propose_switch(&start, &scene, &config, &mut rng).unwrap();
        let s = accept(start.clone(), p, &mut rng).state;
        hits += usize::from(canonical(s.association()) == kept);
    }
    let freq = hits as f64 / n as f64;
    let se = (expect * (1.0 - expect) / n as f64).sqrt();
    assert!((freq - expect).abs() < 4.0 * se, "{freq} vs {expect}");
}

#[test]
fn gather_without_clutter_is_no_op() {
    let scene = line_scene();
    let state = ChainState::from_tracks(&scene, vec![line_track()], no_annotations());
    let p = propose_gather(&state, &scene, &ProposalConfig::default(), &mut stream(&[2])).unwrap();
    assert!(p.diagnostics.no_op);
}

#[test]
fn gather_accepts_a_clean_clutter_line() {
    let scene = line_scene();
    let state = ChainState::all_clutter(&scene, no_annotations());
    let config = ProposalConfig::default();
    let trials = 1000;
    let mean: f64 = (0..trials)
        .map(|i| {
            let p = propose_gather(&state, &scene, &config, &mut stream(&[9, i])).unwrap();
            acceptance_probability(p.log_ratio)
        })
        .sum::<f64>()
        / trials as f64;
    assert!(mean > 0.5, "{mean}");
}

#[test]
fn gather_and_disperse_ratios_are_inverse() {
    let scene = line_scene();
    let start = ChainState::all_clutter(&scene, no_annotations());
    let config = ProposalConfig::default();
    let mut checked = 0;
    for i in 0..200 {
        let p = propose_gather(&start, &scene, &config, &mut stream(&[4, i])).unwrap();
        let Some(gathered) = p.candidate else { continue };
        // one object, so disperse must pick it
        let d = propose_disperse(&gathered, &scene, &config, &mut stream(&[8, i])).unwrap();
        let back = d.candidate.unwrap();
        assert_eq!(back.association(), start.association());
        assert_eq!(back.counts(), start.counts());
        assert_eq!(back.log_joint(), start.log_joint());
        assert!((p.log_ratio + d.log_ratio).abs() < 1e-9, "{} {}", p.log_ratio, d.log_ratio);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn disperse_only_object_leaves_all_clutter() {
    let scene = line_scene();
    let state = ChainState::from_tracks(&scene, vec![line_track()], no_annotations());
    let p = propose_disperse(&state, &scene, &ProposalConfig::default(), &mut stream(&[0])).unwrap();
    let c = p.candidate.unwrap();
    assert_eq!(c.num_objects(), 0);
    assert_eq!(c.counts().clutter, vec![1; 5]);
    assert_eq!(c.counts().arrivals, vec![0; 5]);
}

#[test]
fn disperse_rarely_removes_a_good_object() {
    let scene = line_scene();
    let state = ChainState::from_tracks(&scene, vec![line_track()], no_annotations());
    let config = ProposalConfig::default();
    let trials = 1000;
    let mean: f64 = (0..trials)
        .map(|i| acceptance_probability(propose_disperse(&state, &scene, &config, &mut stream(&[6, i])).unwrap().log_ratio))
        .sum::<f64>()
        / trials as f64;
    assert!(mean < 0.05, "{mean}");
}

#[test]
fn extend_never_leaves_a_single_observation() {
    let scene = line_scene();
    let state = ChainState::from_tracks(&scene, vec![line_track()], no_annotations());
    let config = ProposalConfig {
        skip_prob: 0.8,
        ..ProposalConfig::default()
    };
    let mut short = 0;
    for i in 0..500 {
        let p = propose_extend(&state, &scene, &config, &mut stream(&[12, i])).unwrap();
        if p.diagnostics.claims < 2 {
            short += 1;
            assert!(p.diagnostics.auto_rejected && p.candidate.is_none());
            assert!(!accept(state.clone(), p, &mut stream(&[13, i])).accepted);
        } else {
            assert!(p.candidate.unwrap().tracks()[0].len() >= 2);
        }
    }
    assert!(short > 10, "{short}");
}

#[test]
fn extend_prefers_the_better_fitting_point() {
    // the object claims an outlier at t=3 while clutter sits on its line
    let obs = ObservationSet::from_scalars(&[&[0.0], &[0.1], &[0.2], &[0.9, 0.3], &[0.4]]);
    let params = ModelParams::scalar(0.01, 0.01, 0.2, 1.0, 0.0, 100.0, 0.5, 0.5, 0.95, 0.05);
    let scene = Scene::new(obs, params).unwrap();
    let bad = track(&[(0, 0, 0.0), (1, 0, 0.1), (2, 0, 0.2), (3, 0, 0.9), (4, 0, 0.4)]);
    let state = ChainState::from_tracks(&scene, vec![bad], no_annotations());
    let mut fixed = 0u64;
    let trials = 200;
    for i in 0..trials {
        let p = propose_extend(&state, &scene, &ProposalConfig::default(), &mut stream(&[21, i])).unwrap();
        let c = p.candidate.unwrap();
        fixed += u64::from(c.tracks()[0].position(3).map(|j| c.tracks()[0].obs[j]) == Some(1));
    }
    assert!(fixed > trials * 9 / 10, "{fixed}");
}

#[test]
fn ffbs_with_zero_process_noise_is_a_level_fit() {
    let obs = ObservationSet::from_scalars(&[&[0.2], &[0.5], &[], &[0.1]]);
    let params = ModelParams::scalar(0.0, 0.1, 0.0, 10.0, 0.0, 4.0, 0.2, 0.2, 0.9, 0.1);
    let scene = Scene::new(obs, params).unwrap();
    let tr = track(&[(0, 0, 0.0), (1, 0, 0.0), (3, 0, 0.0)]);
    let ys = [v(0.2), v(0.5), v(0.1)];
    let smooth = smoother_marginals(&filter_pass(&tr.times, &ys, &scene.model).unwrap(), &scene.model).unwrap();
    for i in 0..5 {
        let (out, _) = gibbs_track(&tr, &scene, &mut stream(&[i])).unwrap();
        // no state at the missed frame
        assert_eq!(out.times, vec![0, 1, 3]);
        for x in &out.states {
            assert!((x[0] - out.states[0][0]).abs() < 1e-6);
        }
        // the shared level has the smoother's posterior spread around the mean
        assert!((out.states[0][0] - smooth[0].mean[0]).abs() < 6.0 * smooth[0].cov[(0, 0)].sqrt());
    }
}

#[test]
fn every_proposed_state_is_valid() {
    let (scene, tracks) = two_lanes();
    let mut state = ChainState::from_tracks(&scene, tracks, no_annotations());
    let config = ProposalConfig::default();
    for i in 0..3000u64 {
        let mut rng = stream(&[31, i]);
        let kind = config.weights.sample(&mut rng);
        let p = propose(kind, &state, &scene, &config, &mut rng).unwrap();
        if let Some(c) = &p.candidate {
            let m = derive_counts(c.association()).unwrap();
            assert_eq!(check_validity(c.association(), &m), Ok(()), "{kind:?}");
            assert_eq!(&m, c.counts());
            let fresh = c.recompute_log_joint(&scene).unwrap();
            assert!((fresh - c.log_joint()).abs() < 1e-8, "{kind:?}");
        } else {
            assert!(p.diagnostics.no_op || p.diagnostics.auto_rejected, "{kind:?}");
        }
        if kind == MoveKind::Ffbs {
            assert!(p.log_ratio >= 0.0);
        }
        state = accept(state, p, &mut rng).state;
    }
}
