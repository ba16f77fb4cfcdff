use std::sync::Arc;

use jpt_core::analysis::{
    clear_mot, clear_mot_chunked, distance, frames_from_hypothesis, hypothesis_distance, hypothesis_from_tracks,
    match_modes, posterior_variance_summary, stlc_cost, total_variation, tv_curve, Frames, Hypothesis, StlcParams,
    Trajectory,
};
use jpt_core::io::{generate_k33, DEFAULT_NOISE};
use jpt_core::model::{ChainState, Scene};
use jpt_core::proposals::gibbs_track;
use jpt_core::rng::stream;
use jpt_core::sampler::SampleRecord;
use jpt_core::proposals::MoveKind;
use jpt_core::Execution;
use nalgebra::DVector;
use proptest::prelude::*;

fn scalar_frames(rows: &[&[(usize, f64)]]) -> Frames {
    rows.iter()
        .map(|r| r.iter().map(|&(id, y)| (id, DVector::from_element(1, y))).collect())
        .collect()
}

#[test]
fn stlc_matches_scalar_script() {
    let a = Trajectory::from_scalars(&[(0, 0.0), (1, 0.3), (2, 0.5)]);
    let b = Trajectory::from_scalars(&[(1, 0.1), (2, 0.6), (4, 0.4)]);
    let p = StlcParams {
        spatial_weight: 0.3,
        spatial_scale: 0.5,
        temporal_scale: 2.0,
    };
    let c = stlc_cost(&a, &b, &p).unwrap();
    assert!((c - 0.37774799935539516).abs() < 1e-14, "{c}");
    assert_eq!(c, stlc_cost(&b, &a, &p).unwrap());
}

#[test]
fn two_against_one_splits_mass() {
    let a: Hypothesis = vec![
        Trajectory::from_scalars(&[(0, 0.0), (1, 0.0)]),
        Trajectory::from_scalars(&[(0, 1.0), (1, 1.0)]),
    ];
    let b: Hypothesis = vec![Trajectory::from_scalars(&[(0, 0.0), (1, 0.0)])];
    let r = hypothesis_distance(&a, &b, &StlcParams::default()).unwrap();
    assert_eq!((r.plan[(0, 0)], r.plan[(1, 0)]), (0.5, 0.5));
    assert!((r.distance - 0.5 * r.cost[(1, 0)]).abs() < 1e-15);
    assert_eq!(r.cost[(0, 0)], 0.0);
}

/// The mode re-dealt at every cut against the true mode, compared with the
/// spread between posterior draws of the true mode. Modes that differ only
/// over the last segment are closer than that spread (see the ignored
/// separation test in `io_tests`).
#[test]
fn crossing_mode_is_further_than_draws_of_one_mode() {
    let s = generate_k33(0, DEFAULT_NOISE);
    let scene = Scene::new(s.obs.clone(), s.params.clone()).unwrap();
    let p = StlcParams::for_observations(&s.obs);
    let h = &s.params.observation;
    let draws: Vec<Hypothesis> = (0..12u64)
        .map(|i| {
            let d: Vec<_> = s.modes[0]
                .iter()
                .enumerate()
                .map(|(k, tr)| gibbs_track(tr, &scene, &mut stream(&[i, k as u64])).unwrap().0)
                .collect();
            hypothesis_from_tracks(&d, h)
        })
        .collect();
    let mut within: f64 = 0.0;
    for i in 0..draws.len() {
        for j in i + 1..draws.len() {
            within = within.max(distance(&draws[i], &draws[j], &p).unwrap());
        }
    }
    let truth = hypothesis_from_tracks(&s.modes[0], h);
    // swap at the first two cuts, reversed order at the third
    let crossing = hypothesis_from_tracks(&s.modes[23], h);
    let d = distance(&crossing, &truth, &p).unwrap();
    assert!(d > within, "{d} <= {within}");
    assert!(d > 0.0);
}

fn hypothesis() -> impl Strategy<Value = Hypothesis> {
    let traj = prop::collection::btree_map(0usize..12, -2.0..2.0f64, 1..6)
        .prop_map(|m| Trajectory::from_scalars(&m.into_iter().collect::<Vec<_>>()));
    prop::collection::vec(traj, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_is_a_pseudometric(a in hypothesis(), b in hypothesis(), c in hypothesis()) {
        let p = StlcParams::default();
        let ab = distance(&a, &b, &p).unwrap();
        let ba = distance(&b, &a, &p).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(distance(&a, &a, &p).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        let ac = distance(&a, &c, &p).unwrap();
        let cb = distance(&c, &b, &p).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9, "{} > {} + {}", ab, ac, cb);
    }

    #[test]
    fn plan_has_uniform_marginals(a in hypothesis(), b in hypothesis()) {
        let r = hypothesis_distance(&a, &b, &StlcParams::default()).unwrap();
        for i in 0..a.len() {
            prop_assert!((r.plan.row(i).sum() - 1.0 / a.len() as f64).abs() < 1e-12);
        }
        for j in 0..b.len() {
            prop_assert!((r.plan.column(j).sum() - 1.0 / b.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_matching_ignores_labels(seed in 0u64..1000, rot in 1usize..3) {
        let s = generate_k33(seed % 3, DEFAULT_NOISE);
        let p = StlcParams::for_observations(&s.obs);
        let h = &s.params.observation;
        let modes: Vec<Hypothesis> = s.modes.iter().map(|m| hypothesis_from_tracks(m, h)).collect();
        let pick = (seed as usize * 7) % 24;
        let sample = modes[pick].clone();
        let mut relabeled = sample.clone();
        relabeled.rotate_left(rot);
        let a = match_modes(&[sample], &modes, &p, Execution::Sequential).unwrap();
        let b = match_modes(&[relabeled], &modes, &p, Execution::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.assignments[0], pick);
    }

    #[test]
    fn tv_shrinks_when_mass_moves_toward_target(
        counts in prop::collection::vec(0u32..20, 24),
        from in 0usize..24,
        to in 0usize..24,
    ) {
        let total: u32 = counts.iter().sum();
        prop_assume!(total > 0);
        let n = total as f64;
        let target = vec![1.0 / 24.0; 24];
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        prop_assert_eq!(total_variation(&p, &p), 0.0);
        // move one unit from an over-full bin to an under-full one
        prop_assume!(p[from] > target[from] && p[to] < target[to]);
        let mut q = p.clone();
        let step = (1.0 / n).min(p[from] - target[from]).min(target[to] - p[to]);
        q[from] -= step;
        q[to] += step;
        prop_assert!(total_variation(&q, &target) <= total_variation(&p, &target) + 1e-15);
    }
}

#[test]
fn tv_curve_counts_prefixes() {
    let target = vec![0.5, 0.5];
    let curve = tv_curve(&[0, 0, 1, 1], &target, &[1, 2, 4]);
    assert_eq!(curve, vec![(1, 0.5), (2, 0.5), (4, 0.0)]);
}

/// Two objects; the output swaps its two ids from the fourth frame on.
fn swap_instance() -> (Frames, Frames) {
    let row: &[(usize, f64)] = &[(1, 0.0), (2, 1.0)];
    let truth = scalar_frames(&[row; 6]);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for t in 0..6 {
        rows.push(if t < 3 { vec![(10, 0.0), (20, 1.0)] } else { vec![(10, 1.0), (20, 0.0)] });
    }
    let refs: Vec<&[(usize, f64)]> = rows.iter().map(|r| r.as_slice()).collect();
    (scalar_frames(&refs), truth)
}

#[test]
fn clear_counts_two_switches_for_one_swap() {
    let (out, truth) = swap_instance();
    let r = clear_mot(&out, &truth, 0.5);
    assert_eq!(r.id_switches, 2);
    assert_eq!((r.misses, r.false_positives, r.fragmentations, r.truth_count), (0, 0, 0, 12));
    assert!((r.mota - (1.0 - 2.0 / 12.0)).abs() < 1e-15);
}

#[test]
fn clear_is_label_invariant() {
    let (out, truth) = swap_instance();
    let relabel: Frames = out
        .iter()
        .map(|f| f.iter().map(|(id, y)| (if *id == 10 { 3 } else { 8 }, y.clone())).collect())
        .collect();
    assert_eq!(clear_mot(&out, &truth, 0.5), clear_mot(&relabel, &truth, 0.5));
    let truth_relabel: Frames = truth
        .iter()
        .map(|f| f.iter().map(|(id, y)| (3 - id, y.clone())).collect())
        .collect();
    assert_eq!(clear_mot(&out, &truth, 0.5), clear_mot(&out, &truth_relabel, 0.5));
}

#[test]
fn clear_keeps_correspondence_within_radius() {
    // output 10 stays with truth 1 even when 20 comes closer
    let truth = scalar_frames(&[&[(1, 0.0), (2, 1.0)], &[(1, 0.0), (2, 1.0)]]);
    let out = scalar_frames(&[&[(10, 0.0), (20, 1.0)], &[(10, 0.3), (20, 0.05)]]);
    let r = clear_mot(&out, &truth, 0.5);
    assert_eq!(r.id_switches, 0);
    assert_eq!(r.misses, 1);
    assert_eq!(r.false_positives, 1);
}

#[test]
fn chunked_clear_resets_identities() {
    let (out, truth) = swap_instance();
    // the swap falls exactly on the chunk boundary
    let r = clear_mot_chunked(&out, &truth, 0.5, 3);
    assert_eq!((r.id_switches, r.truth_count), (0, 12));
    assert_eq!(r.mota, 1.0);
}

#[test]
fn frames_use_one_based_ids() {
    let h: Hypothesis = vec![Trajectory::from_scalars(&[(0, 0.1), (2, 0.2)])];
    let f = frames_from_hypothesis(&h, 3);
    assert_eq!(f[0][0].0, 1);
    assert!(f[1].is_empty());
}

fn record(scene: &Scene, tracks: Vec<jpt_core::Track>, log_joint: f64) -> SampleRecord {
    let state = ChainState::from_tracks(scene, tracks, Arc::from(vec![]));
    SampleRecord {
        iteration: 0,
        chain: 0,
        log_joint,
        kind: MoveKind::Ffbs,
        accepted: true,
        z: state.association().clone(),
        tracks: state.tracks().to_vec(),
        counts: state.counts().clone(),
    }
}

#[test]
fn variance_of_shifted_samples() {
    let s = generate_k33(0, DEFAULT_NOISE);
    let scene = Scene::new(s.obs.clone(), s.params.clone()).unwrap();
    let p = StlcParams::for_observations(&s.obs);
    let base = s.modes[0].clone();
    let mut shifted = base.clone();
    for tr in &mut shifted {
        for x in &mut tr.states {
            x[0] += 0.02;
        }
    }
    let same = posterior_variance_summary(&[record(&scene, base.clone(), 1.0), record(&scene, base.clone(), 0.0)], &scene.model, &p)
        .unwrap();
    assert_eq!(same.mean_sd, 0.0);
    assert_eq!(same.objects.len(), 3);
    let two = posterior_variance_summary(&[record(&scene, base, 1.0), record(&scene, shifted, 0.0)], &scene.model, &p).unwrap();
    assert_eq!(two.reference, 0);
    assert!((two.mean_sd - 0.01).abs() < 1e-9, "{}", two.mean_sd);
    assert!(two.objects.iter().all(|o| o.support.iter().all(|&n| n == 2)));
}
