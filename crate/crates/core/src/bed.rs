//! Sequential experiment design over pairwise same/different annotations.
//!
//! A design asks whether two observations come from the same object. The
//! planner picks the design with the highest Monte-Carlo mutual information
//! between the answer and the trajectories; the answer enters the posterior
//! as one more likelihood factor on the association.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    distance, hypothesis_from_tracks, hypothesis_from_truth, posterior_variance_summary, Hypothesis, StlcParams,
    VarianceSummary,
};
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp_sorted;
use crate::model::{Annotation, Association, Design, GroundTruth, Model, ObsRef, ObservationSet, Provenance, Scene, Track};
use crate::parallel::{map_slice, Execution};
use crate::rng::{derive_seed, stream};
use crate::sampler::{run_replicates, thin, SampleRecord, SamplerConfig};

pub const DEFAULT_RELIABILITY: f64 = 0.99;
pub const DEFAULT_BUDGET: usize = 500;

pub fn annotation_log_likelihood(a: &Annotation, z: &Association) -> f64 {
    a.log_likelihood(z)
}

/// Joint distribution of the labels of a design's two observations under
/// one sample's trajectories. Label 0 is clutter.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPosterior {
    pub cells: Vec<((usize, usize), f64)>,
}

impl PairPosterior {
    /// Probability that both observations belong to the same object.
    pub fn p_same(&self) -> f64 {
        self.cells
            .iter()
            .filter(|((a, b), _)| *a > 0 && a == b)
            .map(|(_, p)| p)
            .sum::<f64>()
            .min(1.0)
    }
}

/// Log-likelihood of `y` under clutter and under each object holding a
/// state at `t`.
fn label_options(at: ObsRef, tracks: &[Track], obs: &ObservationSet, model: &Model) -> Vec<(usize, f64)> {
    let y = obs.get(at);
    let mut out = vec![(0, model.log_clutter(y))];
    for (i, tr) in tracks.iter().enumerate() {
        if let Some(p) = tr.position(at.t) {
            out.push((i + 1, model.log_obs(y, &tr.states[p])));
        }
    }
    out
}

/// Enumerates the joint labels of the two observations, weighting each by
/// the observation likelihood. When both are at the same time an object
/// cannot claim both.
pub fn pairwise_assignment_posterior(
    tracks: &[Track],
    obs: &ObservationSet,
    design: &Design,
    model: &Model,
) -> PairPosterior {
    let first = label_options(design.first, tracks, obs, model);
    let second = label_options(design.second, tracks, obs, model);
    let same_time = design.first.t == design.second.t;
    let mut cells = Vec::with_capacity(first.len() * second.len());
    for &(a, la) in &first {
        for &(b, lb) in &second {
            if same_time && a > 0 && a == b {
                continue;
            }
            cells.push(((a, b), la + lb));
        }
    }
    let weights: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let log_z = log_sum_exp_sorted(&weights);
    PairPosterior {
        cells: cells.into_iter().map(|(k, w)| (k, (w - log_z).exp())).collect(),
    }
}

/// Probability of answering "same" given a same-object probability.
fn predictive_same(p_same: f64, reliability: f64) -> f64 {
    reliability * p_same + (1.0 - reliability) * (1.0 - p_same)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Nested Monte-Carlo estimate (nats) of the mutual information between
/// the answer to `design` and the trajectories. Each sample draws its
/// answer from its own association; the marginal answer probability is the
/// sample average. Not clamped at zero.
pub fn estimate_mi<R: Rng + ?Sized>(
    design: &Design,
    samples: &[SampleRecord],
    obs: &ObservationSet,
    model: &Model,
    reliability: f64,
    rng: &mut R,
) -> Result<MiEstimate> {
    if samples.len() < 2 {
        return Err(Error::Parameter("mutual information needs at least 2 samples".into()));
    }
    let q: Vec<f64> = samples
        .iter()
        .map(|s| predictive_same(pairwise_assignment_posterior(&s.tracks, obs, design, model).p_same(), reliability))
        .collect();
    let m = samples.len() as f64;
    let marginal_same = q.iter().sum::<f64>() / m;
    let terms: Vec<f64> = samples
        .iter()
        .zip(&q)
        .map(|(s, &qm)| {
            let same_z = s.z.same_object(design.first, design.second);
            let p_yes = if same_z { reliability } else { 1.0 - reliability };
            let yes = rng.random::<f64>() < p_yes;
            if yes {
                qm.ln() - marginal_same.ln()
            } else {
                (1.0 - qm).ln() - (1.0 - marginal_same).ln()
            }
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / m;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(MiEstimate {
        value: mean,
        std_error: (var / m).sqrt(),
    })
}

/// Fraction of samples that put both observations on one object.
pub fn same_object_frequency(samples: &[SampleRecord], design: &Design) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| s.z.same_object(design.first, design.second))
        .count();
    hits as f64 / samples.len() as f64
}

/// Candidate designs for one round. Pairs whose same-object frequency lies
/// in (0.05, 0.95) come first, closest to 0.5 first; the list is topped up
/// from the remaining pairs in the same order until `budget` is reached.
pub fn candidate_designs(obs: &ObservationSet, samples: &[SampleRecord], budget: usize) -> Vec<Design> {
    let refs: Vec<ObsRef> = obs.refs().collect();
    let labels: Vec<Vec<usize>> = samples
        .iter()
        .map(|s| refs.iter().map(|&r| s.z.get(r)).collect())
        .collect();
    let m = samples.len().max(1) as f64;
    let mut scored: Vec<(bool, f64, Design)> = Vec::new();
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            let hits = labels.iter().filter(|l| l[i] > 0 && l[i] == l[j]).count();
            let p = hits as f64 / m;
            let unsure = p > 0.05 && p < 0.95;
            scored.push((!unsure, (p - 0.5).abs(), Design::new(refs[i], refs[j])));
        }
    }
    scored.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().take(budget).map(|s| s.2).collect()
}

/// MI estimates of every candidate, best first (earlier design on ties).
/// Each candidate draws from its own stream, so the result does not depend
/// on the execution mode.
pub fn rank_designs(
    candidates: &[Design],
    samples: &[SampleRecord],
    obs: &ObservationSet,
    model: &Model,
    reliability: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(Design, MiEstimate)>> {
    let estimates = map_slice(exec, candidates, |d| {
        let key = [seed, d.first.t as u64, d.first.n as u64, d.second.t as u64, d.second.n as u64];
        estimate_mi(d, samples, obs, model, reliability, &mut stream(&key))
    });
    let mut ranked = candidates
        .iter()
        .copied()
        .zip(estimates)
        .map(|(d, e)| e.map(|e| (d, e)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.1.value.total_cmp(&a.1.value).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Argmax of [`rank_designs`].
pub fn select_design(
    candidates: &[Design],
    samples: &[SampleRecord],
    obs: &ObservationSet,
    model: &Model,
    reliability: f64,
    seed: u64,
    exec: Execution,
) -> Result<Option<(Design, MiEstimate)>> {
    Ok(rank_designs(candidates, samples, obs, model, reliability, seed, exec)?.into_iter().next())
}

/// Reads the true relation from ground-truth labels and flips it with
/// probability `1 - reliability`.
pub fn simulated_oracle<R: Rng + ?Sized>(
    truth: &GroundTruth,
    design: &Design,
    reliability: f64,
    round: usize,
    rng: &mut R,
) -> Result<Annotation> {
    let same = truth
        .same_object(design)
        .ok_or_else(|| Error::Parameter("ground truth has no observation labels".into()))?;
    let flip = rng.random::<f64>() >= reliability;
    Ok(Annotation {
        design: *design,
        same: same != flip,
        reliability,
        provenance: Provenance::SimulatedOracle,
        round,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    Mi,
    Random,
}

impl Planner {
    pub fn as_str(self) -> &'static str {
        match self {
            Planner::Mi => "mi",
            Planner::Random => "random",
        }
    }
}

impl std::str::FromStr for Planner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mi" => Ok(Planner::Mi),
            "random" => Ok(Planner::Random),
            other => Err(Error::Parameter(format!("unknown planner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BedConfig {
    pub rounds: usize,
    pub planner: Planner,
    pub reliability: f64,
    pub budget: usize,
    pub sampler: SamplerConfig,
    pub stlc: StlcParams,
}

impl Default for BedConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            planner: Planner::Mi,
            reliability: DEFAULT_RELIABILITY,
            budget: DEFAULT_BUDGET,
            sampler: SamplerConfig::default(),
            stlc: StlcParams::default(),
        }
    }
}

impl BedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reliability > 0.5 && self.reliability <= 1.0) {
            return Err(Error::Parameter("annotation reliability must lie in (0.5, 1]".into()));
        }
        self.stlc.validate()?;
        self.sampler.validate()
    }
}

/// Samples retained for metrics and planning after one round of sampling.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub round: usize,
    /// Evenly spaced post-burn-in samples of every chain, chain-major.
    pub samples: Vec<SampleRecord>,
    pub summary: VarianceSummary,
    /// Mean hypothesis distance of the samples to the ground truth.
    pub distance: Option<f64>,
}

/// Runs all chains with the given annotations, from scratch. The sampler
/// seed is derived from `(config.sampler.seed, round)`.
pub fn sample_posterior(
    scene: &Scene,
    config: &BedConfig,
    annotations: &[Annotation],
    round: usize,
    truth: Option<&Hypothesis>,
) -> Result<Posterior> {
    let mut sampler = config.sampler.clone();
    sampler.seed = derive_seed(&[config.sampler.seed, round as u64]);
    let chains = run_replicates(scene, &sampler, Arc::from(annotations.to_vec()))?;
    let samples: Vec<SampleRecord> = chains
        .iter()
        .flat_map(|c| thin(c, sampler.metric_samples))
        .collect();
    let summary = posterior_variance_summary(&samples, &scene.model, &config.stlc)?;
    let h = &scene.model.params().observation;
    let distance = match truth {
        Some(gt) => {
            let ds = map_slice(sampler.execution, &samples, |s| distance(&hypothesis_from_tracks(&s.tracks, h), gt, &config.stlc))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            Some(ds.iter().sum::<f64>() / ds.len().max(1) as f64)
        }
        None => None,
    };
    Ok(Posterior {
        round,
        samples,
        summary,
        distance,
    })
}

/// Uniformly random pair of observations at different times.
pub fn random_design<R: Rng + ?Sized>(obs: &ObservationSet, rng: &mut R) -> Option<Design> {
    let refs: Vec<ObsRef> = obs.refs().collect();
    let pairs: usize = refs.len() * refs.len().saturating_sub(1) / 2;
    let same_time: usize = obs.counts().iter().map(|&n| n * n.saturating_sub(1) / 2).sum();
    if pairs == same_time {
        return None;
    }
    loop {
        let i = rng.random_range(0..refs.len());
        let j = rng.random_range(0..refs.len());
        if refs[i].t != refs[j].t {
            return Some(Design::new(refs[i], refs[j]));
        }
    }
}

/// Next design to ask about, with its MI estimate for the MI planner.
pub fn plan_design(
    scene: &Scene,
    config: &BedConfig,
    posterior: &Posterior,
) -> Result<Option<(Design, Option<MiEstimate>)>> {
    Ok(plan_designs(scene, config, posterior, 1)?.into_iter().next())
}

/// Up to `count` designs in the planner's order of preference; the first is
/// the one [`plan_design`] returns.
pub fn plan_designs(
    scene: &Scene,
    config: &BedConfig,
    posterior: &Posterior,
    count: usize,
) -> Result<Vec<(Design, Option<MiEstimate>)>> {
    let seed = derive_seed(&[config.sampler.seed, posterior.round as u64, 0x0bed]);
    match config.planner {
        Planner::Mi => {
            let candidates = candidate_designs(&scene.obs, &posterior.samples, config.budget);
            let ranked = rank_designs(
                &candidates,
                &posterior.samples,
                &scene.obs,
                &scene.model,
                config.reliability,
                seed,
                config.sampler.execution,
            )?;
            Ok(ranked.into_iter().take(count).map(|(d, e)| (d, Some(e))).collect())
        }
        Planner::Random => Ok((0..count)
            .map_while(|k| {
                let mut rng = if k == 0 { stream(&[seed]) } else { stream(&[seed, k as u64]) };
                random_design(&scene.obs, &mut rng).map(|d| (d, None))
            })
            .collect()),
    }
}

/// One row of the round table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub planner: Planner,
    /// MI estimate of the design answered to reach this round.
    pub mi: Option<f64>,
    pub design: Option<Design>,
    pub answer: Option<bool>,
    pub uncertainty: f64,
    pub distance: Option<f64>,
}

/// Closed loop: sample with no annotations, then for each round plan a
/// design, ask `oracle`, add the answer and resample from scratch.
pub fn run_bed_loop<F>(
    scene: &Scene,
    truth: Option<&GroundTruth>,
    config: &BedConfig,
    mut oracle: F,
    mut on_round: impl FnMut(&RoundRecord, &Posterior),
) -> Result<Vec<RoundRecord>>
where
    F: FnMut(&Design, usize) -> Result<Annotation>,
{
    config.validate()?;
    let truth_hyp = truth.map(hypothesis_from_truth);
    let mut annotations: Vec<Annotation> = Vec::new();
    let mut records = Vec::with_capacity(config.rounds + 1);
    let mut posterior = sample_posterior(scene, config, &annotations, 0, truth_hyp.as_ref())?;
    let first = RoundRecord {
        round: 0,
        planner: config.planner,
        mi: None,
        design: None,
        answer: None,
        uncertainty: posterior.summary.mean_sd,
        distance: posterior.distance,
    };
    on_round(&first, &posterior);
    records.push(first);
    for round in 1..=config.rounds {
        let Some((design, mi)) = plan_design(scene, config, &posterior)? else {
            break;
        };
        let annotation = oracle(&design, round)?;
        let answer = annotation.same;
        annotations.push(annotation);
        posterior = sample_posterior(scene, config, &annotations, round, truth_hyp.as_ref())?;
        let rec = RoundRecord {
            round,
            planner: config.planner,
            mi: mi.map(|e| e.value),
            design: Some(design),
            answer: Some(answer),
            uncertainty: posterior.summary.mean_sd,
            distance: posterior.distance,
        };
        on_round(&rec, &posterior);
        records.push(rec);
    }
    Ok(records)
}

/// Oracle closure answering from ground truth with seeded errors.
pub fn ground_truth_oracle(
    truth: &GroundTruth,
    reliability: f64,
    seed: u64,
) -> impl FnMut(&Design, usize) -> Result<Annotation> + '_ {
    move |d, round| simulated_oracle(truth, d, reliability, round, &mut stream(&[seed, round as u64, 0x0a]))
}

/// Writes the round table as CSV.
pub fn write_rounds<W: std::io::Write>(w: W, records: &[RoundRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["round", "planner", "mi", "t1", "n1", "t2", "n2", "answer", "uncertainty", "distance"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        wtr.write_record([
            r.round.to_string(),
            r.planner.as_str().to_string(),
            opt(r.mi.map(|v| v.to_string())),
            opt(r.design.map(|d| (d.first.t + 1).to_string())),
            opt(r.design.map(|d| d.first.n.to_string())),
            opt(r.design.map(|d| (d.second.t + 1).to_string())),
            opt(r.design.map(|d| d.second.n.to_string())),
            opt(r.answer.map(|a| if a { "same" } else { "different" }.to_string())),
            r.uncertainty.to_string(),
            opt(r.distance.map(|v| v.to_string())),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
