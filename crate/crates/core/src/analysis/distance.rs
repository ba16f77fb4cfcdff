//! Optimal-transport distance between hypotheses, mode matching and total variation.

use nalgebra::DMatrix;
use serde::Serialize;

use super::stlc::{stlc_cost, Hypothesis, StlcParams};
use super::transport::transport;
use crate::error::Result;
use crate::parallel::{map_slice, Execution};

/// Cost charged per unit of mass that has nothing to be transported to.
pub const UNMATCHED_COST: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisDistanceReport {
    /// STLC cost between every object of A (rows) and of B (columns).
    pub cost: DMatrix<f64>,
    /// Mass moved from each object of A to each object of B; rows sum to
    /// `1/|A|` and columns to `1/|B|`.
    pub plan: DMatrix<f64>,
    pub distance: f64,
}

/// Discrete optimal transport between uniform distributions over the
/// objects of `a` and `b`, with STLC ground cost. If either side has no
/// objects, all mass pays [`UNMATCHED_COST`] (0 when both are empty).
pub fn hypothesis_distance(a: &Hypothesis, b: &Hypothesis, p: &StlcParams) -> Result<HypothesisDistanceReport> {
    let (ka, kb) = (a.len(), b.len());
    if ka == 0 || kb == 0 {
        return Ok(HypothesisDistanceReport {
            cost: DMatrix::zeros(ka, kb),
            plan: DMatrix::zeros(ka, kb),
            distance: if ka == kb { 0.0 } else { UNMATCHED_COST },
        });
    }
    let mut cost = DMatrix::zeros(ka, kb);
    let mut rows = vec![vec![0.0; kb]; ka];
    for i in 0..ka {
        for j in 0..kb {
            let c = stlc_cost(&a[i], &b[j], p)?;
            cost[(i, j)] = c;
            rows[i][j] = c;
        }
    }
    // integer masses: each A object carries |B| units, each B object |A|
    let flows = transport(&rows, &vec![kb as u64; ka], &vec![ka as u64; kb]);
    let total = (ka * kb) as f64;
    let plan = DMatrix::from_fn(ka, kb, |i, j| flows[i][j] as f64 / total);
    let mut terms: Vec<f64> = plan.iter().zip(cost.iter()).map(|(m, c)| m * c).collect();
    let distance = crate::linalg::sum_sorted(&mut terms).max(0.0);
    Ok(HypothesisDistanceReport { cost, plan, distance })
}

pub fn distance(a: &Hypothesis, b: &Hypothesis, p: &StlcParams) -> Result<f64> {
    Ok(hypothesis_distance(a, b, p)?.distance)
}

/// For each object of `reference`, the object of `sample` receiving most of
/// its transported mass (lowest index on ties).
pub fn align_to(reference: &Hypothesis, sample: &Hypothesis, p: &StlcParams) -> Result<Vec<Option<usize>>> {
    if sample.is_empty() {
        return Ok(vec![None; reference.len()]);
    }
    let report = hypothesis_distance(reference, sample, p)?;
    Ok((0..reference.len())
        .map(|i| {
            let row = report.plan.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            (row[best] > 0.0).then_some(best)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeHistogram {
    pub counts: Vec<usize>,
    /// Nearest mode of each input sample, in input order.
    pub assignments: Vec<usize>,
}

impl ModeHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Number of modes hit at least once.
    pub fn covered(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Index of the nearest mode (lowest index on ties).
pub fn nearest_mode(sample: &Hypothesis, modes: &[Hypothesis], p: &StlcParams) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, m) in modes.iter().enumerate() {
        let d = distance(sample, m, p)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

pub fn match_modes(samples: &[Hypothesis], modes: &[Hypothesis], p: &StlcParams, exec: Execution) -> Result<ModeHistogram> {
    let assignments = map_slice(exec, samples, |s| nearest_mode(s, modes, p)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0; modes.len()];
    for &a in &assignments {
        counts[a] += 1;
    }
    Ok(ModeHistogram { counts, assignments })
}

/// `0.5 * sum |p_i - q_i|`, in [0, 1] for probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different supports");
    let mut terms: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    0.5 * crate::linalg::sum_sorted(&mut terms)
}

/// Total variation to `target` of the histogram of the first `n` entries
/// of `assignments`, for each `n` in `checkpoints`.
pub fn tv_curve(assignments: &[usize], target: &[f64], checkpoints: &[usize]) -> Vec<(usize, f64)> {
    checkpoints
        .iter()
        .map(|&n| {
            let n = n.min(assignments.len());
            let mut counts = vec![0usize; target.len()];
            for &a in &assignments[..n] {
                counts[a] += 1;
            }
            let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect();
            (n, total_variation(&p, target))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::stlc::Trajectory;
    use super::*;

    fn hyp(points: &[&[(usize, f64)]]) -> Hypothesis {
        points.iter().map(|p| Trajectory::from_scalars(p)).collect()
    }

    #[test]
    fn relabeling_is_free() {
        let a = hyp(&[&[(0, 0.0), (1, 0.1)], &[(0, 1.0), (1, 1.2)]]);
        let b = hyp(&[&[(0, 1.0), (1, 1.2)], &[(0, 0.0), (1, 0.1)]]);
        let r = hypothesis_distance(&a, &b, &StlcParams::default()).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.plan[(0, 1)], 0.5);
    }

    #[test]
    fn singleton_mass_splits() {
        let a = hyp(&[&[(0, 0.0), (1, 0.1)], &[(0, 1.0), (1, 1.2)]]);
        let b = hyp(&[&[(0, 0.4), (1, 0.5)]]);
        let r = hypothesis_distance(&a, &b, &StlcParams::default()).unwrap();
        assert_eq!(r.plan[(0, 0)], 0.5);
        assert_eq!(r.plan[(1, 0)], 0.5);
        let expect = 0.5 * r.cost[(0, 0)] + 0.5 * r.cost[(1, 0)];
        assert!((r.distance - expect).abs() < 1e-15);
    }

    #[test]
    fn empty_sides() {
        let a = hyp(&[&[(0, 0.0), (1, 0.1)]]);
        let p = StlcParams::default();
        assert_eq!(distance(&a, &vec![], &p).unwrap(), 2.0);
        assert_eq!(distance(&vec![], &vec![], &p).unwrap(), 0.0);
    }

    #[test]
    fn tv_examples() {
        let uniform = vec![1.0 / 24.0; 24];
        let mut point = vec![0.0; 24];
        point[3] = 1.0;
        assert!((total_variation(&point, &uniform) - 23.0 / 24.0).abs() < 1e-15);
        assert_eq!(total_variation(&uniform, &uniform), 0.0);
    }

    #[test]
    fn one_sample_perturbation() {
        // 48 samples: two per mode, then move one sample between modes
        let n = 48.0;
        let mut counts = [2.0; 24];
        counts[0] += 1.0;
        counts[1] -= 1.0;
        let p: Vec<f64> = counts.iter().map(|c| c / n).collect();
        let tv = total_variation(&p, &[1.0 / 24.0; 24]);
        assert!((tv - 1.0 / n).abs() < 1e-15, "{tv}");
    }
}
