//! Domain types and the factors of the joint posterior.

mod counts;
mod density;
mod kernel;
mod params;
mod state;
mod types;

pub use counts::{
    check_validity, derive_counts, log_binomial, log_counts_prior, log_poisson, EventCounts,
};
pub use density::{
    log_annotations, log_dynamics, log_joint, log_observation, track_log_dynamics,
    track_log_observation, track_weight,
};
pub use kernel::{compose, gap_power, Model, StepKernel};
pub use params::{matrix_rows, vector, DetectionSupport, ModelParams};
pub use state::{ChainState, Scene};
pub use types::{
    Annotation, Association, CountKind, Design, GroundTruth, ObsRef, ObservationSet, Provenance, Track,
    Violation,
};
