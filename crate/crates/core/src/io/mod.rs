//! File formats and synthetic data.

mod records;
mod synth;
mod tables;

pub use records::{
    load_checkpoint, load_samples, read_samples, save_checkpoint, save_samples, write_samples,
    SampleWriter,
};
pub use synth::{band_params, generate_k33, generate_teaser, SyntheticScene, DEFAULT_NOISE, K33_HORIZON, TEASER_HORIZON};
pub use tables::{
    load_ground_truth, load_labels, load_observations, read_ground_truth, read_labels,
    read_observations, save_ground_truth, save_labels, save_observations, write_ground_truth,
    write_labels, write_observations,
};
