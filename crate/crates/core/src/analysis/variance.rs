//! Pointwise posterior moments of trajectories, aligned across samples.

use nalgebra::DVector;
use serde::Serialize;

use super::distance::align_to;
use super::stlc::{hypothesis_from_tracks, StlcParams};
use crate::error::Result;
use crate::gaussian::bridge;
use crate::model::{Model, Track};
use crate::sampler::SampleRecord;

/// Mean and SD of one reference object on the integer grid of its span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectBand {
    pub times: Vec<usize>,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    /// Samples contributing at each time.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSummary {
    /// Index of the reference (highest log joint) sample.
    pub reference: usize,
    pub objects: Vec<ObjectBand>,
    /// Mean SD over every (time, object, dimension) cell.
    pub mean_sd: f64,
}

/// Observation-space mean and per-dimension variance of `track` at `t`:
/// exact at stored states, the Gaussian bridge between them, `None`
/// outside the track's span.
fn moments_at(track: &Track, t: usize, model: &Model) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    let h = &model.params().observation;
    if t < track.arrival() || t > track.departure() {
        return Ok(None);
    }
    let i = track.times.partition_point(|&s| s < t);
    if track.times[i] == t {
        return Ok(Some((h * &track.states[i], DVector::zeros(h.nrows()))));
    }
    let b = bridge(model, (track.times[i - 1], &track.states[i - 1]), (track.times[i], &track.states[i]), t)?;
    let var = (h * &b.cov * h.transpose()).diagonal();
    Ok(Some((h * b.mean, var)))
}

/// Aligns every sample's objects to the highest-scoring sample by optimal
/// transport, then combines within-sample (bridge) and between-sample
/// variance at every integer time of each reference object's span.
pub fn posterior_variance_summary(samples: &[SampleRecord], model: &Model, stlc: &StlcParams) -> Result<VarianceSummary> {
    if samples.is_empty() {
        return Ok(VarianceSummary {
            reference: 0,
            objects: Vec::new(),
            mean_sd: 0.0,
        });
    }
    let reference = samples
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if s.log_joint > samples[best].log_joint { i } else { best });
    let h = &model.params().observation;
    let ref_tracks = &samples[reference].tracks;
    let ref_hyp = hypothesis_from_tracks(ref_tracks, h);
    let dim = h.nrows();
    // (sum of means, sum of second moments, count) per object and time
    let mut acc: Vec<Vec<(DVector<f64>, DVector<f64>, usize)>> = ref_tracks
        .iter()
        .map(|tr| vec![(DVector::zeros(dim), DVector::zeros(dim), 0); tr.departure() - tr.arrival() + 1])
        .collect();
    for s in samples {
        let alignment = align_to(&ref_hyp, &hypothesis_from_tracks(&s.tracks, h), stlc)?;
        for (r, aligned) in alignment.into_iter().enumerate() {
            let Some(j) = aligned else { continue };
            let rt = &ref_tracks[r];
            for t in rt.arrival()..=rt.departure() {
                if let Some((m, v)) = moments_at(&s.tracks[j], t, model)? {
                    let cell = &mut acc[r][t - rt.arrival()];
                    cell.1 += &v + m.component_mul(&m);
                    cell.0 += m;
                    cell.2 += 1;
                }
            }
        }
    }
    let mut sds = Vec::new();
    let objects = ref_tracks
        .iter()
        .zip(acc)
        .map(|(rt, cells)| {
            let mut band = ObjectBand {
                times: Vec::new(),
                mean: Vec::new(),
                sd: Vec::new(),
                support: Vec::new(),
            };
            for (k, (s1, s2, n)) in cells.into_iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let mean = s1 / n as f64;
                let sd: Vec<f64> = (0..dim)
                    .map(|d| (s2[d] / n as f64 - mean[d] * mean[d]).max(0.0).sqrt())
                    .collect();
                sds.extend(sd.iter().copied());
                band.times.push(rt.arrival() + k);
                band.mean.push(mean.iter().copied().collect());
                band.sd.push(sd);
                band.support.push(n);
            }
            band
        })
        .collect();
    let mean_sd = if sds.is_empty() {
        0.0
    } else {
        crate::linalg::sum_sorted(&mut sds) / sds.len() as f64
    };
    Ok(VarianceSummary {
        reference,
        objects,
        mean_sd,
    })
}
