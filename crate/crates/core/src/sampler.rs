//! Chain orchestration: move scheduling, burn-in, thinning and replicates.
//!
//! Iteration `i` of chain `c` draws all of its randomness from the stream
//! keyed by `(seed, c, i)`, so a chain can be stopped at any iteration and
//! resumed from a checkpoint with bit-identical output.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Annotation, Association, ChainState, EventCounts, Scene, Track};
use crate::parallel::{map_indexed, Execution};
use crate::proposals::{self, accept, Diagnostics, MoveKind, ProposalConfig};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    /// Fraction of iterations discarded at the start of each chain.
    pub burn_in: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Evenly spaced post-burn-in samples used for metrics.
    pub metric_samples: usize,
    /// Run an extra trajectory sweep after every this many iterations (0 disables).
    pub sweep_every: usize,
    pub proposals: ProposalConfig,
    #[serde(default = "Execution::available")]
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 0.5,
            replicates: 5,
            seed: 0,
            metric_samples: 200,
            sweep_every: 50,
            proposals: ProposalConfig::default(),
            execution: Execution::available(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Parameter("iterations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::Parameter("burn_in must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.proposals.skip_prob) {
            return Err(Error::Parameter("skip_prob must lie in [0, 1]".into()));
        }
        self.proposals.weights.validate()
    }

    /// Index of the first retained iteration.
    pub fn burn_in_iterations(&self) -> usize {
        (self.iterations as f64 * self.burn_in).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub iteration: usize,
    pub kind: MoveKind,
    pub accepted: bool,
    pub log_ratio: f64,
    pub diagnostics: Diagnostics,
}

/// One retained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub iteration: usize,
    pub chain: usize,
    pub log_joint: f64,
    pub kind: MoveKind,
    pub accepted: bool,
    pub z: Association,
    pub tracks: Vec<Track>,
    pub counts: EventCounts,
}

/// Enough to resume a chain exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub chain: usize,
    /// Next iteration to run.
    pub iteration: usize,
    pub tracks: Vec<Track>,
}

/// One MH step: draw a move kind, propose, accept or reject.
pub fn step<R: rand::Rng + ?Sized>(
    state: ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<(ChainState, StepInfo)> {
    let kind = config.weights.sample(rng);
    let proposal = proposals::propose(kind, &state, scene, config, rng)?;
    let out = accept(state, proposal, rng);
    Ok((
        out.state,
        StepInfo {
            iteration: 0,
            kind,
            accepted: out.accepted,
            log_ratio: out.log_ratio,
            diagnostics: out.diagnostics,
        },
    ))
}

pub struct Chain<'a> {
    scene: &'a Scene,
    config: &'a SamplerConfig,
    chain: usize,
    iteration: usize,
    state: ChainState,
}

impl<'a> Chain<'a> {
    /// Starts from the all-clutter hypothesis.
    pub fn new(scene: &'a Scene, config: &'a SamplerConfig, chain: usize, annotations: Arc<[Annotation]>) -> Self {
        Self {
            scene,
            config,
            chain,
            iteration: 0,
            state: ChainState::all_clutter(scene, annotations),
        }
    }

    pub fn resume(
        scene: &'a Scene,
        config: &'a SamplerConfig,
        checkpoint: &Checkpoint,
        annotations: Arc<[Annotation]>,
    ) -> Result<Self> {
        if checkpoint.seed != config.seed {
            return Err(Error::Parameter(format!(
                "checkpoint seed {} differs from configured seed {}",
                checkpoint.seed, config.seed
            )));
        }
        let state = ChainState::from_tracks(scene, checkpoint.tracks.clone(), annotations);
        if !state.log_joint().is_finite() {
            return Err(Error::Inconsistent("checkpoint state has zero probability".into()));
        }
        Ok(Self {
            scene,
            config,
            chain: checkpoint.chain,
            iteration: checkpoint.iteration,
            state,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn advance(&mut self) -> Result<StepInfo> {
        let mut rng = stream(&[self.config.seed, self.chain as u64, self.iteration as u64]);
        let state = self.state.clone();
        let (mut state, mut info) = step(state, self.scene, &self.config.proposals, &mut rng)?;
        let every = self.config.sweep_every;
        if every > 0 && (self.iteration + 1).is_multiple_of(every) {
            let sweep = proposals::gibbs_trajectories(&state, self.scene, &mut rng)?;
            state = sweep.candidate.expect("gibbs sweep always proposes");
        }
        info.iteration = self.iteration;
        self.state = state;
        self.iteration += 1;
        Ok(info)
    }

    pub fn record(&self, info: &StepInfo) -> SampleRecord {
        SampleRecord {
            iteration: info.iteration,
            chain: self.chain,
            log_joint: self.state.log_joint(),
            kind: info.kind,
            accepted: info.accepted,
            z: self.state.association().clone(),
            tracks: self.state.tracks().to_vec(),
            counts: self.state.counts().clone(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.config.seed,
            chain: self.chain,
            iteration: self.iteration,
            tracks: self.state.tracks().to_vec(),
        }
    }
}

/// Runs a chain to `config.iterations`, passing each post-burn-in record to `sink`.
pub fn run_chain_with<F>(
    scene: &Scene,
    config: &SamplerConfig,
    chain: usize,
    annotations: Arc<[Annotation]>,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(SampleRecord) -> Result<()>,
{
    config.validate()?;
    let mut c = Chain::new(scene, config, chain, annotations);
    let burn = config.burn_in_iterations();
    while c.iteration() < config.iterations {
        let info = c.advance()?;
        if info.iteration >= burn {
            sink(c.record(&info))?;
        }
    }
    Ok(())
}

pub fn run_chain(
    scene: &Scene,
    config: &SamplerConfig,
    chain: usize,
    annotations: Arc<[Annotation]>,
) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::with_capacity(config.iterations - config.burn_in_iterations());
    run_chain_with(scene, config, chain, annotations, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Independent chains `0..config.replicates`, possibly run concurrently.
pub fn run_replicates(
    scene: &Scene,
    config: &SamplerConfig,
    annotations: Arc<[Annotation]>,
) -> Result<Vec<Vec<SampleRecord>>> {
    config.validate()?;
    map_indexed(config.execution, config.replicates, |c| {
        run_chain(scene, config, c, Arc::clone(&annotations))
    })
    .into_iter()
    .collect()
}

/// `count` evenly spaced items, always including the first and last.
pub fn thin<T: Clone>(items: &[T], count: usize) -> Vec<T> {
    let n = items.len();
    if count == 0 || n == 0 {
        return Vec::new();
    }
    if count >= n {
        return items.to_vec();
    }
    if count == 1 {
        return vec![items[n - 1].clone()];
    }
    (0..count)
        .map(|i| items[(i * (n - 1) + (count - 1) / 2) / (count - 1)].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_spacing() {
        let v: Vec<usize> = (0..1000).collect();
        let t = thin(&v, 200);
        assert_eq!(t.len(), 200);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 999);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(thin(&v[..3], 5), vec![0, 1, 2]);
    }
}
