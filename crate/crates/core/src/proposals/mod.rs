//! Metropolis-Hastings moves over (trajectories, association, counts).
//!
//! Each move returns a [`Proposal`]: a candidate state (or none, for no-ops
//! and automatic rejections) with its log Hastings ratio. [`accept`] applies
//! the Metropolis rule.

mod build;
mod ffbs;
mod switch;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, Scene};

pub use build::{
    gather_candidates, propose_disperse, propose_extend, propose_gather, track_build_log_density,
    BuildPlan,
};
pub use ffbs::{gibbs_track, gibbs_trajectories};
pub use switch::propose_switch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Switch,
    Gather,
    Disperse,
    Extend,
    Ffbs,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::Switch,
        MoveKind::Extend,
        MoveKind::Gather,
        MoveKind::Disperse,
        MoveKind::Ffbs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::Switch => "switch",
            MoveKind::Gather => "gather",
            MoveKind::Disperse => "disperse",
            MoveKind::Extend => "extend",
            MoveKind::Ffbs => "ffbs",
        }
    }
}

/// Relative selection weights of the moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveWeights {
    pub switch: f64,
    pub extend: f64,
    pub gather: f64,
    pub disperse: f64,
    pub ffbs: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            switch: 0.35,
            extend: 0.25,
            gather: 0.15,
            disperse: 0.05,
            ffbs: 0.20,
        }
    }
}

impl MoveWeights {
    pub fn get(&self, kind: MoveKind) -> f64 {
        match kind {
            MoveKind::Switch => self.switch,
            MoveKind::Gather => self.gather,
            MoveKind::Disperse => self.disperse,
            MoveKind::Extend => self.extend,
            MoveKind::Ffbs => self.ffbs,
        }
    }

    pub fn only(kind: MoveKind) -> Self {
        let mut w = Self {
            switch: 0.0,
            extend: 0.0,
            gather: 0.0,
            disperse: 0.0,
            ffbs: 0.0,
        };
        match kind {
            MoveKind::Switch => w.switch = 1.0,
            MoveKind::Gather => w.gather = 1.0,
            MoveKind::Disperse => w.disperse = 1.0,
            MoveKind::Extend => w.extend = 1.0,
            MoveKind::Ffbs => w.ffbs = 1.0,
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let all = MoveKind::ALL.map(|k| self.get(k));
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("move weights must be finite and nonnegative".into()));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Parameter("move weights must not all be zero".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let total: f64 = MoveKind::ALL.iter().map(|&k| self.get(k)).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for k in MoveKind::ALL {
            acc += self.get(k);
            if u < acc {
                return k;
            }
        }
        *MoveKind::ALL
            .iter()
            .rev()
            .find(|&&k| self.get(k) > 0.0)
            .expect("validated weights")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Largest switch subset.
    pub max_subset: usize,
    /// Probability of skipping a time step while building a track.
    pub skip_prob: f64,
    /// Keep each switched object's claims fixed up to its second observation.
    pub pin_switch: bool,
    pub weights: MoveWeights,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            max_subset: 7,
            skip_prob: 0.01,
            pin_switch: true,
            weights: MoveWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub subset_size: usize,
    pub switch_times: usize,
    pub claims: usize,
    pub no_op: bool,
    pub auto_rejected: bool,
    pub jittered: bool,
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub candidate: Option<ChainState>,
    pub log_ratio: f64,
    pub diagnostics: Diagnostics,
}

impl Proposal {
    pub(crate) fn no_op(kind: MoveKind) -> Self {
        Self {
            kind,
            candidate: None,
            log_ratio: f64::NEG_INFINITY,
            diagnostics: Diagnostics {
                no_op: true,
                ..Default::default()
            },
        }
    }

    pub(crate) fn rejected(kind: MoveKind, diagnostics: Diagnostics) -> Self {
        Self {
            kind,
            candidate: None,
            log_ratio: f64::NEG_INFINITY,
            diagnostics: Diagnostics {
                auto_rejected: true,
                ..diagnostics
            },
        }
    }
}

/// Result of one Metropolis-Hastings step.
#[derive(Debug, Clone)]
pub struct ProposalOutcome {
    pub state: ChainState,
    pub kind: MoveKind,
    pub log_ratio: f64,
    pub accepted: bool,
    pub diagnostics: Diagnostics,
}

/// Metropolis rule: accept when `log R >= 0`, else with probability `exp(log R)`.
/// A NaN ratio is rejected.
pub fn accept<R: Rng + ?Sized>(current: ChainState, proposal: Proposal, rng: &mut R) -> ProposalOutcome {
    let Proposal {
        kind,
        candidate,
        log_ratio,
        diagnostics,
    } = proposal;
    let take = match &candidate {
        None => false,
        Some(_) if log_ratio >= 0.0 => true,
        Some(_) if log_ratio.is_nan() => false,
        Some(_) => rng.random::<f64>().ln() < log_ratio,
    };
    let state = match (take, candidate) {
        (true, Some(c)) => c,
        _ => current,
    };
    ProposalOutcome {
        state,
        kind,
        log_ratio,
        accepted: take,
        diagnostics,
    }
}

/// Draw and apply one move.
pub fn propose<R: Rng + ?Sized>(
    kind: MoveKind,
    state: &ChainState,
    scene: &Scene,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    match kind {
        MoveKind::Switch => propose_switch(state, scene, config, rng),
        MoveKind::Gather => propose_gather(state, scene, config, rng),
        MoveKind::Disperse => propose_disperse(state, scene, config, rng),
        MoveKind::Extend => propose_extend(state, scene, config, rng),
        MoveKind::Ffbs => gibbs_trajectories(state, scene, rng),
    }
}
