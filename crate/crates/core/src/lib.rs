//! Batch multi-object tracking by sampling the joint posterior over
//! trajectories, data associations and event counts.
//!
//! The sampler mixes five moves (switch, gather, disperse, extend and a
//! forward-filtering backward-sampling Gibbs sweep). Posterior samples feed
//! the uncertainty diagnostics in [`analysis`] and the annotation planner in
//! [`bed`].

pub mod analysis;
pub mod bed;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod proposals;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{
    Annotation, Association, ChainState, Design, EventCounts, GroundTruth, Model, ModelParams, ObsRef,
    ObservationSet, Scene, Track,
};
pub use parallel::Execution;
