//! CLEAR MOT: misses, false positives, identity switches, fragmentations, MOTA.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use super::stlc::Hypothesis;
use super::transport::matching;

/// Per-frame `(id, position)` lists.
pub type Frames = Vec<Vec<(usize, DVector<f64>)>>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MotReport {
    pub mota: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub matches: usize,
    pub truth_count: usize,
}

impl MotReport {
    fn finish(mut self) -> Self {
        let errors = (self.misses + self.false_positives + self.id_switches) as f64;
        self.mota = 1.0 - errors / self.truth_count.max(1) as f64;
        self
    }

    fn add(self, o: MotReport) -> Self {
        MotReport {
            mota: 0.0,
            misses: self.misses + o.misses,
            false_positives: self.false_positives + o.false_positives,
            id_switches: self.id_switches + o.id_switches,
            fragmentations: self.fragmentations + o.fragmentations,
            matches: self.matches + o.matches,
            truth_count: self.truth_count + o.truth_count,
        }
        .finish()
    }
}

/// Positions of each trajectory at its own times; ids are 1-based indices.
pub fn frames_from_hypothesis(h: &Hypothesis, horizon: usize) -> Frames {
    let mut frames = vec![Vec::new(); horizon];
    for (i, tr) in h.iter().enumerate() {
        for (&t, y) in tr.times.iter().zip(&tr.points) {
            if t < horizon {
                frames[t].push((i + 1, y.clone()));
            }
        }
    }
    frames
}

/// CLEAR MOT over all frames. Correspondences from the previous frame are
/// kept while they stay within `radius`; remaining objects are matched by
/// a maximum-cardinality minimum-distance assignment. A switch is counted
/// when a truth object is matched to a different output id than at its last
/// match; a fragmentation when a truth object is matched again after being
/// unmatched.
pub fn clear_mot(output: &Frames, truth: &Frames, radius: f64) -> MotReport {
    let mut report = MotReport::default();
    let mut current: HashMap<usize, usize> = HashMap::new();
    let mut last_match: HashMap<usize, usize> = HashMap::new();
    let mut tracked_before: HashMap<usize, bool> = HashMap::new();
    let horizon = output.len().max(truth.len());
    let empty = Vec::new();
    for t in 0..horizon {
        let gt = truth.get(t).unwrap_or(&empty);
        let out = output.get(t).unwrap_or(&empty);
        report.truth_count += gt.len();
        let mut gt_used = vec![false; gt.len()];
        let mut out_used = vec![false; out.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (gi, (g, gy)) in gt.iter().enumerate() {
            if let Some(&h) = current.get(g) {
                if let Some(oi) = out.iter().position(|(id, _)| *id == h) {
                    if !out_used[oi] && (gy - &out[oi].1).norm() <= radius {
                        gt_used[gi] = true;
                        out_used[oi] = true;
                        pairs.push((gi, oi));
                    }
                }
            }
        }
        let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
        let free_out: Vec<usize> = (0..out.len()).filter(|&i| !out_used[i]).collect();
        let mut edges = Vec::new();
        for (a, &gi) in free_gt.iter().enumerate() {
            for (b, &oi) in free_out.iter().enumerate() {
                let d = (&gt[gi].1 - &out[oi].1).norm();
                if d <= radius {
                    edges.push((a, b, d));
                }
            }
        }
        for (a, b) in matching(free_gt.len(), free_out.len(), &edges) {
            pairs.push((free_gt[a], free_out[b]));
            gt_used[free_gt[a]] = true;
            out_used[free_out[b]] = true;
        }
        let mut next = HashMap::new();
        for &(gi, oi) in &pairs {
            let (g, h) = (gt[gi].0, out[oi].0);
            if let Some(&prev) = last_match.get(&g) {
                if prev != h {
                    report.id_switches += 1;
                }
            }
            last_match.insert(g, h);
            next.insert(g, h);
        }
        for (gi, (g, _)) in gt.iter().enumerate() {
            let tracked = gt_used[gi];
            let was = tracked_before.get(g).copied();
            if tracked && was == Some(false) {
                report.fragmentations += 1;
            }
            // only record "untracked" once the object has been tracked at least once
            if tracked || last_match.contains_key(g) {
                tracked_before.insert(*g, tracked);
            }
        }
        report.matches += pairs.len();
        report.misses += gt_used.iter().filter(|u| !**u).count();
        report.false_positives += out_used.iter().filter(|u| !**u).count();
        current = next;
    }
    report.finish()
}

/// CLEAR MOT evaluated independently on consecutive chunks of `chunk`
/// frames, with identities reset at each chunk start; counts are summed.
pub fn clear_mot_chunked(output: &Frames, truth: &Frames, radius: f64, chunk: usize) -> MotReport {
    let horizon = output.len().max(truth.len());
    if chunk == 0 || chunk >= horizon {
        return clear_mot(output, truth, radius);
    }
    let slice = |f: &Frames, a: usize, b: usize| -> Frames { (a..b).map(|t| f.get(t).cloned().unwrap_or_default()).collect() };
    (0..horizon)
        .step_by(chunk)
        .map(|a| {
            let b = (a + chunk).min(horizon);
            clear_mot(&slice(output, a, b), &slice(truth, a, b), radius)
        })
        .fold(MotReport::default(), MotReport::add)
}
